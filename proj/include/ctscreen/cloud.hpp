#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctscreen/volume.hpp"

namespace ctscreen {

// MHU interval used to select voxels when converting a volume to points.
struct Gate {
  int lo = 600;
  int hi = 32767;
};

struct Point {
  uint16_t x = 0, y = 0, z = 0;  // voxel coordinates
  uint16_t i = 0;                // MHU intensity
  uint8_t label = 0;
};

// Sparse view of a gated volume. Points are unique voxels in z-major scan
// order; coordinates always lie inside source_dims.
struct PointCloud {
  std::vector<Point> points;
  Vec3i source_dims;
  Gate gate;
  bool has_labels = false;
};

// Exactly n points sampled from one spatial block, with assembled feature
// rows of width 4 (x,y,z,i) or 7 (plus normalized x',y',z' computed against
// the full cloud's bounding extent).
struct PointBlock {
  int n = 0;
  int feature_width = 4;
  std::vector<float> features;  // n * feature_width, row-major
  std::vector<uint8_t> labels;  // n (when the cloud is labelled)
  Vec3i block_origin;           // (z,y,x)
  int block_size = 48;
  double foreground_fraction = 0.0;
  bool background_only = false;
};

// Numeric conditioning of assembled feature rows. Coordinates stay in voxel
// units; centering shifts them to the block centre. The normalized triple
// for width-7 rows is unaffected.
struct FeatureScaling {
  float intensity_scale = 1.0f / 1024.0f;  // water-unit scale
  bool center_coords = true;
  float coord_scale = 1.0f;  // optional mm anisotropy, default off
};

// Keeps exactly the voxels with lo <= intensity <= hi, coordinate order
// deterministic (z-major scan).
PointCloud volume_to_cloud(const VoxelGrid& grid, const LabelVolume* labels, Gate gate);

// Scatters labelled points into a background-initialised volume.
LabelVolume cloud_to_label_volume(const PointCloud& cloud, Vec3i dims);

// Axis-aligned bounding box of the cloud, inclusive, as (z,y,x) corners.
std::pair<Vec3i, Vec3i> cloud_extent(const PointCloud& cloud);

// Samples exactly n points from the cubic block at origin; draws with
// replacement when the block holds fewer than n points. feature_width is
// 4 for PointNet rows and 7 for PointNet++ rows.
PointBlock sample_block(const PointCloud& cloud, Vec3i origin, int block_size, int n, int feature_width,
                        const FeatureScaling& scaling, Rng& rng);

// Rejection-samples candidate blocks (centred on randomly drawn cloud
// points) until one holds >50% foreground points, up to a retry budget;
// past the budget the best candidate seen is returned. A cloud with no
// foreground at all yields a block flagged background_only.
PointBlock pick_training_block(const PointCloud& cloud, int block_size, int n, int feature_width,
                               const FeatureScaling& scaling, Rng& rng, int retry_budget = 64);

// Binary record I/O: per point x,y,z,i as u16 plus label u8, with a JSON
// sidecar {count, gate, source_dims}.
void save_cloud(const PointCloud& cloud, const std::string& path);
PointCloud load_cloud(const std::string& path);

}  // namespace ctscreen
