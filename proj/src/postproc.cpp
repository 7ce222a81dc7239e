#include "ctscreen/postproc.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ctscreen {

using nlohmann::json;

BinaryMask make_mask(Vec3i dims) {
  BinaryMask m;
  m.dims = dims;
  m.bits.assign(static_cast<size_t>(voxel_count(dims)), 0);
  return m;
}

BinaryMask class_mask(const LabelVolume& labels, uint8_t cls) {
  BinaryMask m = make_mask(labels.dims);
  for (size_t i = 0; i < labels.data.size(); i++) m.bits[i] = labels.data[i] == cls ? 1 : 0;
  return m;
}

StructuringElement StructuringElement::cube(int radius) {
  StructuringElement se;
  for (int z = -radius; z <= radius; z++)
    for (int y = -radius; y <= radius; y++)
      for (int x = -radius; x <= radius; x++) se.offsets.push_back({z, y, x});
  return se;
}

namespace {

void check_se(const StructuringElement& se) {
  if (se.offsets.empty()) throw validation_error("structuring element is empty");
  bool has_origin = false;
  for (const auto& o : se.offsets)
    if (o.z == 0 && o.y == 0 && o.x == 0) has_origin = true;
  if (!has_origin) throw validation_error("structuring element must contain the origin");
}

int se_radius(const StructuringElement& se) {
  int64_t r = 0;
  for (const auto& o : se.offsets) r = std::max({r, std::abs(o.z), std::abs(o.y), std::abs(o.x)});
  return static_cast<int>(r);
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
  check_se(se);
  BinaryMask out = make_mask(mask.dims);
  const Vec3i d = mask.dims;
  for (int64_t z = 0; z < d.z; z++)
    for (int64_t y = 0; y < d.y; y++)
      for (int64_t x = 0; x < d.x; x++) {
        if (!mask.at(z, y, x)) continue;
        for (const auto& o : se.offsets) {
          const int64_t tz = z + o.z, ty = y + o.y, tx = x + o.x;
          if (in_bounds(d, tz, ty, tx)) out.set(tz, ty, tx, true);
        }
      }
  return out;
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
  check_se(se);
  BinaryMask out = make_mask(mask.dims);
  const Vec3i d = mask.dims;
  for (int64_t z = 0; z < d.z; z++)
    for (int64_t y = 0; y < d.y; y++)
      for (int64_t x = 0; x < d.x; x++) {
        bool keep = true;
        for (const auto& o : se.offsets) {
          const int64_t tz = z + o.z, ty = y + o.y, tx = x + o.x;
          if (!in_bounds(d, tz, ty, tx) || !mask.at(tz, ty, tx)) {
            keep = false;
            break;
          }
        }
        out.set(z, y, x, keep);
      }
  return out;
}

BinaryMask close(const BinaryMask& mask, const StructuringElement& se) {
  check_se(se);
  const int pad = se_radius(se);
  const Vec3i pd = {mask.dims.z + 2 * pad, mask.dims.y + 2 * pad, mask.dims.x + 2 * pad};
  BinaryMask padded = make_mask(pd);
  for (int64_t z = 0; z < mask.dims.z; z++)
    for (int64_t y = 0; y < mask.dims.y; y++)
      for (int64_t x = 0; x < mask.dims.x; x++)
        if (mask.at(z, y, x)) padded.set(z + pad, y + pad, x + pad, true);
  BinaryMask closed = erode(dilate(padded, se), se);
  BinaryMask out = make_mask(mask.dims);
  for (int64_t z = 0; z < mask.dims.z; z++)
    for (int64_t y = 0; y < mask.dims.y; y++)
      for (int64_t x = 0; x < mask.dims.x; x++) out.set(z, y, x, closed.at(z + pad, y + pad, x + pad));
  return out;
}

namespace {

// neighbour offsets for 6/18/26 adjacency
std::vector<Vec3i> adjacency(int connectivity) {
  if (connectivity != 6 && connectivity != 18 && connectivity != 26)
    throw validation_error("connectivity must be 6, 18 or 26");
  std::vector<Vec3i> n;
  for (int z = -1; z <= 1; z++)
    for (int y = -1; y <= 1; y++)
      for (int x = -1; x <= 1; x++) {
        const int manhattan = std::abs(z) + std::abs(y) + std::abs(x);
        if (manhattan == 0) continue;
        if (connectivity == 6 && manhattan > 1) continue;
        if (connectivity == 18 && manhattan > 2) continue;
        n.push_back({z, y, x});
      }
  return n;
}

}  // namespace

std::vector<std::vector<int64_t>> connected_components(const BinaryMask& mask, int connectivity) {
  const auto nbrs = adjacency(connectivity);
  const Vec3i d = mask.dims;
  const int64_t n = voxel_count(d);
  std::vector<uint8_t> visited(static_cast<size_t>(n), 0);
  std::vector<std::vector<int64_t>> components;
  std::vector<int64_t> stack;
  for (int64_t seed = 0; seed < n; seed++) {
    if (!mask.bits[static_cast<size_t>(seed)] || visited[static_cast<size_t>(seed)]) continue;
    // BFS/DFS from the first unvisited foreground voxel in z-major order,
    // which makes component ordering by minimal index automatic.
    std::vector<int64_t> comp;
    stack.clear();
    stack.push_back(seed);
    visited[static_cast<size_t>(seed)] = 1;
    while (!stack.empty()) {
      const int64_t cur = stack.back();
      stack.pop_back();
      comp.push_back(cur);
      const int64_t cz = cur / (d.y * d.x);
      const int64_t cy = (cur / d.x) % d.y;
      const int64_t cx = cur % d.x;
      for (const auto& o : nbrs) {
        const int64_t tz = cz + o.z, ty = cy + o.y, tx = cx + o.x;
        if (!in_bounds(d, tz, ty, tx)) continue;
        const int64_t ti = linear_index(d, tz, ty, tx);
        if (mask.bits[static_cast<size_t>(ti)] && !visited[static_cast<size_t>(ti)]) {
          visited[static_cast<size_t>(ti)] = 1;
          stack.push_back(ti);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  return components;
}

namespace {

Detection make_detection(uint8_t cls, std::vector<int64_t> voxels, Vec3i dims, Spacing spacing) {
  Detection det;
  det.cls = cls;
  det.voxel_count = static_cast<int64_t>(voxels.size());
  det.volume_mm3 = static_cast<double>(det.voxel_count) * spacing.voxel_volume_mm3();
  det.bbox_lo = {dims.z, dims.y, dims.x};
  det.bbox_hi = {0, 0, 0};
  for (int64_t idx : voxels) {
    const int64_t z = idx / (dims.y * dims.x), y = (idx / dims.x) % dims.y, x = idx % dims.x;
    det.bbox_lo.z = std::min(det.bbox_lo.z, z);
    det.bbox_lo.y = std::min(det.bbox_lo.y, y);
    det.bbox_lo.x = std::min(det.bbox_lo.x, x);
    det.bbox_hi.z = std::max(det.bbox_hi.z, z);
    det.bbox_hi.y = std::max(det.bbox_hi.y, y);
    det.bbox_hi.x = std::max(det.bbox_hi.x, x);
  }
  det.voxels = std::move(voxels);
  return det;
}

}  // namespace

DetectionSet detect(const LabelVolume& labels, Spacing spacing_mm, const PostprocParams& params) {
  const StructuringElement se = StructuringElement::cube(params.se_radius);
  DetectionSet out;
  out.dims = labels.dims;
  for (uint8_t cls = 1; cls < kNumClasses; cls++) {
    BinaryMask closed = close(class_mask(labels, cls), se);
    for (auto& comp : connected_components(closed, params.connectivity)) {
      if (static_cast<int64_t>(comp.size()) < params.min_voxels) continue;
      out.detections.push_back(make_detection(cls, std::move(comp), labels.dims, spacing_mm));
    }
  }
  return out;
}

DetectionSet label_objects(const LabelVolume& labels, Spacing spacing_mm, int connectivity) {
  DetectionSet out;
  out.dims = labels.dims;
  for (uint8_t cls = 1; cls < kNumClasses; cls++) {
    for (auto& comp : connected_components(class_mask(labels, cls), connectivity))
      out.detections.push_back(make_detection(cls, std::move(comp), labels.dims, spacing_mm));
  }
  return out;
}

namespace {

// run-length encoding over sorted linear indices: [start, length, ...]
json rle_encode(const std::vector<int64_t>& voxels) {
  json runs = json::array();
  size_t i = 0;
  while (i < voxels.size()) {
    size_t j = i + 1;
    while (j < voxels.size() && voxels[j] == voxels[j - 1] + 1) j++;
    runs.push_back(voxels[i]);
    runs.push_back(static_cast<int64_t>(j - i));
    i = j;
  }
  return runs;
}

std::vector<int64_t> rle_decode(const json& runs) {
  std::vector<int64_t> voxels;
  for (size_t i = 0; i + 1 < runs.size(); i += 2) {
    const int64_t start = runs[i].get<int64_t>(), len = runs[i + 1].get<int64_t>();
    for (int64_t k = 0; k < len; k++) voxels.push_back(start + k);
  }
  return voxels;
}

}  // namespace

void save_detections(const DetectionSet& dets, const std::string& path, bool with_voxels) {
  json j;
  j["dims"] = {dets.dims.z, dets.dims.y, dets.dims.x};
  j["detections"] = json::array();
  for (const Detection& d : dets.detections) {
    json e;
    e["class"] = d.cls;
    e["voxel_count"] = d.voxel_count;
    e["volume_mm3"] = d.volume_mm3;
    e["bbox"] = {d.bbox_lo.z, d.bbox_lo.y, d.bbox_lo.x, d.bbox_hi.z, d.bbox_hi.y, d.bbox_hi.x};
    if (with_voxels) e["rle"] = rle_encode(d.voxels);
    j["detections"].push_back(std::move(e));
  }
  std::ofstream out(path);
  if (!out) throw runtime_failure("cannot write " + path);
  out << j.dump(2) << "\n";
}

DetectionSet load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open " + path);
  json j;
  in >> j;
  DetectionSet dets;
  dets.dims = {j.at("dims")[0].get<int64_t>(), j.at("dims")[1].get<int64_t>(), j.at("dims")[2].get<int64_t>()};
  for (const auto& e : j.at("detections")) {
    Detection d;
    d.cls = e.at("class").get<uint8_t>();
    d.voxel_count = e.at("voxel_count").get<int64_t>();
    d.volume_mm3 = e.at("volume_mm3").get<double>();
    const auto& b = e.at("bbox");
    d.bbox_lo = {b[0].get<int64_t>(), b[1].get<int64_t>(), b[2].get<int64_t>()};
    d.bbox_hi = {b[3].get<int64_t>(), b[4].get<int64_t>(), b[5].get<int64_t>()};
    if (e.contains("rle")) d.voxels = rle_decode(e["rle"]);
    dets.detections.push_back(std::move(d));
  }
  return dets;
}

}  // namespace ctscreen
