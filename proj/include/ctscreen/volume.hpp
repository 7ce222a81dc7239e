#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctscreen/common.hpp"

namespace ctscreen {

constexpr int kNumClasses = 4;  // background, saline, rubber, clay
constexpr float kMaxIntensity = 32767.0f;

// Dense 3D scalar field of MHU intensities. Storage is z-major
// (slice, row, column). Values are float in memory; on disk they are
// little-endian u16 in [0, 32767], validated on ingest. Normalised
// (zero-mean) copies exist only on the training path.
struct VoxelGrid {
  Vec3i dims;
  Spacing spacing_mm;
  std::vector<float> data;

  float at(int64_t z, int64_t y, int64_t x) const { return data[linear_index(dims, z, y, x)]; }
  float& at(int64_t z, int64_t y, int64_t x) { return data[linear_index(dims, z, y, x)]; }
};

// Dense class-index field aligned to a VoxelGrid. 0=background, 1=saline,
// 2=rubber, 3=clay.
struct LabelVolume {
  Vec3i dims;
  std::vector<uint8_t> data;

  uint8_t at(int64_t z, int64_t y, int64_t x) const { return data[linear_index(dims, z, y, x)]; }
  uint8_t& at(int64_t z, int64_t y, int64_t x) { return data[linear_index(dims, z, y, x)]; }
};

struct CropSpec {
  Vec3i origin;  // (z, y, x)
  Vec3i size;    // (sz, sy, sx)
};

VoxelGrid make_grid(Vec3i dims, Spacing spacing, float fill = 0.0f);
LabelVolume make_labels(Vec3i dims, uint8_t fill = 0);

// --- file I/O ----------------------------------------------------------
//
// `<name>.vol` raw little-endian u16 payload, `<name>.json` sidecar
// {"dims":[nz,ny,nx],"spacing_mm":[dz,dy,dx],"unit":"MHU"}.
// Labels: `<name>.lbl` raw u8 with the same sidecar schema, "unit":"class".

VoxelGrid load_volume(const std::string& vol_path);
void save_volume(const VoxelGrid& grid, const std::string& vol_path);
LabelVolume load_labels(const std::string& lbl_path);
void save_labels(const LabelVolume& labels, const std::string& lbl_path);

// One dataset entry. split is "odd" (train half) or "even" (test half),
// mirroring the odd/even volume-index protocol.
struct ManifestEntry {
  std::string volume;
  std::string labels;
  std::string split;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

// --- resampling --------------------------------------------------------

// Block-mean downsampling. Output dims are ceil(dim/factor); trailing
// partial blocks are padded with air (0 MHU), so every block divides by
// factor^3. Spacing is multiplied by factor.
VoxelGrid downsample(const VoxelGrid& grid, int factor);

// Per-block majority vote. Padding votes background. Ties prefer a
// foreground class over background, then the smaller class index.
LabelVolume downsample_labels(const LabelVolume& labels, int factor);

// Nearest-neighbour replication up to target_dims; source voxel for output
// index i along an axis is floor(i * src/target).
LabelVolume upsample_labels(const LabelVolume& labels, Vec3i target_dims);

// Aligned crop of intensity and labels. The origin is clamped so the crop
// maximally overlaps the volume; anything still outside is padded with air
// (intensities) and background (labels).
std::pair<VoxelGrid, LabelVolume> crop(const VoxelGrid& grid, const LabelVolume& labels, const CropSpec& spec);

// --- augmentation ------------------------------------------------------

// The spatial transform drawn by augment(); exposed so tests can pin the
// coordinate conventions.
struct AugmentParams {
  bool flip_z = false, flip_y = false, flip_x = false;
  int rot90_k = 0;  // in-plane (y,x) quarter turns, 0..3
  bool normalise = true;
};

AugmentParams draw_augment_params(Rng& rng, bool in_plane_square);

// Per-volume z-score normalisation of intensities (labels untouched).
void normalise_intensity(VoxelGrid& grid);

// Applies seeded flips, an in-plane k*90 degree rotation and per-volume
// normalisation. The identical spatial transform is applied to the labels;
// labels are never normalised. Odd k requires ny == nx.
std::pair<VoxelGrid, LabelVolume> augment(const VoxelGrid& grid, const LabelVolume& labels, uint64_t seed);

// Deterministic transform core used by augment(); exposed for tests.
std::pair<VoxelGrid, LabelVolume> apply_augment(const VoxelGrid& grid, const LabelVolume& labels,
                                                const AugmentParams& params);

}  // namespace ctscreen
