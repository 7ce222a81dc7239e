#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctscreen/volume.hpp"

namespace ctscreen {

// Binary foreground mask aligned to a LabelVolume.
struct BinaryMask {
  Vec3i dims;
  std::vector<uint8_t> bits;  // 0/1 per voxel, z-major

  bool at(int64_t z, int64_t y, int64_t x) const { return bits[linear_index(dims, z, y, x)] != 0; }
  void set(int64_t z, int64_t y, int64_t x, bool v) { bits[linear_index(dims, z, y, x)] = v ? 1 : 0; }
};

BinaryMask make_mask(Vec3i dims);
BinaryMask class_mask(const LabelVolume& labels, uint8_t cls);

// 3D binary neighbourhood given as (dz,dy,dx) offsets; must contain the
// origin for the adjunction dilate(m) >= m >= erode(m) to hold.
struct StructuringElement {
  std::vector<Vec3i> offsets;

  static StructuringElement cube(int radius = 1);  // full (2r+1)^3 box
};

// Minkowski dilation/erosion; voxels outside the volume count as background.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);

// Dilation then erosion, evaluated on a halo-padded domain so that closing
// is extensive and idempotent on every mask (a bare erode(dilate(m)) loses
// foreground at the volume boundary).
BinaryMask close(const BinaryMask& mask, const StructuringElement& se);

// Maximal connected sets of foreground voxels under 6/18/26-adjacency,
// ordered by minimal z-major voxel index. Each component is a sorted list
// of linear voxel indices.
std::vector<std::vector<int64_t>> connected_components(const BinaryMask& mask, int connectivity);

struct Detection {
  uint8_t cls = 0;                // 1=saline, 2=rubber, 3=clay
  std::vector<int64_t> voxels;    // sorted linear indices
  int64_t voxel_count = 0;
  double volume_mm3 = 0.0;
  Vec3i bbox_lo, bbox_hi;         // inclusive corners (z,y,x)
};

struct DetectionSet {
  Vec3i dims;
  std::vector<Detection> detections;
};

struct PostprocParams {
  int se_radius = 1;       // 3x3x3 cube
  int connectivity = 26;
  int64_t min_voxels = 64; // prune threshold at full resolution
};

// Per foreground class: binarise, close, label components, prune those
// smaller than min_voxels.
DetectionSet detect(const LabelVolume& labels, Spacing spacing_mm, const PostprocParams& params);

// Components of the raw labels with no morphology or pruning; used to turn
// ground-truth label maps into reference object sets.
DetectionSet label_objects(const LabelVolume& labels, Spacing spacing_mm, int connectivity = 26);

// JSON list [{class, voxel_count, volume_mm3, bbox:[z0,y0,x0,z1,y1,x1]}];
// with_voxels adds a run-length encoded voxel-set sidecar entry per
// detection for exact overlap scoring.
void save_detections(const DetectionSet& dets, const std::string& path, bool with_voxels = true);
DetectionSet load_detections(const std::string& path);

}  // namespace ctscreen
