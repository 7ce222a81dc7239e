#include "ctscreen/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ctscreen {

using nlohmann::json;

PointCloud volume_to_cloud(const VoxelGrid& grid, const LabelVolume* labels, Gate gate) {
  if (gate.lo > gate.hi || gate.lo < 0 || gate.hi > 32767)
    throw validation_error("gate must satisfy 0 <= lo <= hi <= 32767");
  if (labels && labels->dims != grid.dims) throw validation_error("cloud: grid/label dims differ");
  if (grid.dims.z > 65535 || grid.dims.y > 65535 || grid.dims.x > 65535)
    throw validation_error("volume dims exceed u16 point coordinates");
  PointCloud cloud;
  cloud.source_dims = grid.dims;
  cloud.gate = gate;
  cloud.has_labels = labels != nullptr;
  const float lo = static_cast<float>(gate.lo), hi = static_cast<float>(gate.hi);
  int64_t idx = 0;
  for (int64_t z = 0; z < grid.dims.z; z++)
    for (int64_t y = 0; y < grid.dims.y; y++)
      for (int64_t x = 0; x < grid.dims.x; x++, idx++) {
        const float v = grid.data[idx];
        if (v < lo || v > hi) continue;
        Point p;
        p.x = static_cast<uint16_t>(x);
        p.y = static_cast<uint16_t>(y);
        p.z = static_cast<uint16_t>(z);
        p.i = static_cast<uint16_t>(std::lround(v));
        if (labels) p.label = labels->data[idx];
        cloud.points.push_back(p);
      }
  return cloud;
}

LabelVolume cloud_to_label_volume(const PointCloud& cloud, Vec3i dims) {
  LabelVolume out = make_labels(dims);
  for (const Point& p : cloud.points) {
    if (!in_bounds(dims, p.z, p.y, p.x))
      throw validation_error("cloud point (" + std::to_string(p.x) + "," + std::to_string(p.y) + "," +
                             std::to_string(p.z) + ") outside dims");
    out.at(p.z, p.y, p.x) = p.label;
  }
  return out;
}

std::pair<Vec3i, Vec3i> cloud_extent(const PointCloud& cloud) {
  if (cloud.points.empty()) return {Vec3i{0, 0, 0}, Vec3i{0, 0, 0}};
  Vec3i lo{65535, 65535, 65535}, hi{0, 0, 0};
  for (const Point& p : cloud.points) {
    lo.z = std::min<int64_t>(lo.z, p.z);
    lo.y = std::min<int64_t>(lo.y, p.y);
    lo.x = std::min<int64_t>(lo.x, p.x);
    hi.z = std::max<int64_t>(hi.z, p.z);
    hi.y = std::max<int64_t>(hi.y, p.y);
    hi.x = std::max<int64_t>(hi.x, p.x);
  }
  return {lo, hi};
}

namespace {

// Feature row layout: (x, y, z, i[, x', y', z']) with the block-local
// conditioning applied to the first four entries only.
void assemble_features(PointBlock& block, const std::vector<const Point*>& sample, const PointCloud& cloud,
                       const FeatureScaling& scaling) {
  const auto [lo, hi] = cloud_extent(cloud);
  const float cz = static_cast<float>(block.block_origin.z) + block.block_size * 0.5f;
  const float cy = static_cast<float>(block.block_origin.y) + block.block_size * 0.5f;
  const float cx = static_cast<float>(block.block_origin.x) + block.block_size * 0.5f;
  auto norm = [](int64_t v, int64_t lo, int64_t hi) {
    return hi > lo ? static_cast<float>(v - lo) / static_cast<float>(hi - lo) : 0.0f;
  };
  block.features.resize(static_cast<size_t>(block.n) * block.feature_width);
  block.labels.assign(static_cast<size_t>(block.n), 0);
  for (int r = 0; r < block.n; r++) {
    const Point& p = *sample[static_cast<size_t>(r)];
    float* row = block.features.data() + static_cast<size_t>(r) * block.feature_width;
    float fx = static_cast<float>(p.x), fy = static_cast<float>(p.y), fz = static_cast<float>(p.z);
    if (scaling.center_coords) {
      fx -= cx;
      fy -= cy;
      fz -= cz;
    }
    row[0] = fx * scaling.coord_scale;
    row[1] = fy * scaling.coord_scale;
    row[2] = fz * scaling.coord_scale;
    row[3] = static_cast<float>(p.i) * scaling.intensity_scale;
    if (block.feature_width == 7) {
      row[4] = norm(p.x, lo.x, hi.x);
      row[5] = norm(p.y, lo.y, hi.y);
      row[6] = norm(p.z, lo.z, hi.z);
    }
    block.labels[static_cast<size_t>(r)] = p.label;
  }
}

std::vector<const Point*> points_in_block(const PointCloud& cloud, Vec3i origin, int size) {
  std::vector<const Point*> hits;
  for (const Point& p : cloud.points) {
    if (p.z >= origin.z && p.z < origin.z + size && p.y >= origin.y && p.y < origin.y + size && p.x >= origin.x &&
        p.x < origin.x + size)
      hits.push_back(&p);
  }
  return hits;
}

}  // namespace

PointBlock sample_block(const PointCloud& cloud, Vec3i origin, int block_size, int n, int feature_width,
                        const FeatureScaling& scaling, Rng& rng) {
  if (cloud.points.empty()) throw validation_error("sample_block: empty cloud");
  if (feature_width != 4 && feature_width != 7) throw validation_error("feature_width must be 4 or 7");
  if (n <= 0 || block_size <= 0) throw validation_error("block sampling needs positive n and block size");
  auto hits = points_in_block(cloud, origin, block_size);
  if (hits.empty())
    throw runtime_failure("block at (" + std::to_string(origin.z) + "," + std::to_string(origin.y) + "," +
                          std::to_string(origin.x) + ") contains no points");
  PointBlock block;
  block.n = n;
  block.feature_width = feature_width;
  block.block_origin = origin;
  block.block_size = block_size;

  std::vector<const Point*> sample;
  sample.reserve(static_cast<size_t>(n));
  if (static_cast<int>(hits.size()) == n) {
    sample = hits;  // exactly enough: take each point once
  } else if (static_cast<int>(hits.size()) > n) {
    // sample n distinct points (partial Fisher-Yates)
    std::vector<const Point*> pool = hits;
    for (int k = 0; k < n; k++) {
      const int64_t j = k + rng.uniform_int(static_cast<int64_t>(pool.size()) - k);
      std::swap(pool[static_cast<size_t>(k)], pool[static_cast<size_t>(j)]);
      sample.push_back(pool[static_cast<size_t>(k)]);
    }
  } else {
    // with replacement: block tensor shape stays fixed
    for (int k = 0; k < n; k++) sample.push_back(hits[static_cast<size_t>(rng.uniform_int(hits.size()))]);
  }
  int64_t fg = 0;
  for (const Point* p : sample)
    if (p->label > 0) fg++;
  block.foreground_fraction = static_cast<double>(fg) / n;
  assemble_features(block, sample, cloud, scaling);
  return block;
}

PointBlock pick_training_block(const PointCloud& cloud, int block_size, int n, int feature_width,
                               const FeatureScaling& scaling, Rng& rng, int retry_budget) {
  if (cloud.points.empty()) throw validation_error("pick_training_block: empty cloud");
  bool any_fg = false;
  for (const Point& p : cloud.points)
    if (p.label > 0) {
      any_fg = true;
      break;
    }
  auto draw_origin = [&]() {
    const Point& c = cloud.points[static_cast<size_t>(rng.uniform_int(cloud.points.size()))];
    auto clamp_o = [&](int64_t v, int64_t dim) {
      return std::clamp<int64_t>(v - block_size / 2, 0, std::max<int64_t>(dim - block_size, 0));
    };
    return Vec3i{clamp_o(c.z, cloud.source_dims.z), clamp_o(c.y, cloud.source_dims.y),
                 clamp_o(c.x, cloud.source_dims.x)};
  };
  PointBlock best;
  bool have_best = false;
  for (int attempt = 0; attempt < retry_budget; attempt++) {
    PointBlock cand = sample_block(cloud, draw_origin(), block_size, n, feature_width, scaling, rng);
    if (cand.foreground_fraction > 0.5) return cand;
    if (!have_best || cand.foreground_fraction > best.foreground_fraction) {
      best = std::move(cand);
      have_best = true;
    }
    if (!any_fg) break;  // no foreground anywhere: one draw is as good as any
  }
  best.background_only = !any_fg;
  return best;
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw runtime_failure("cannot write " + path);
  std::vector<uint8_t> rec(9);
  for (const Point& p : cloud.points) {
    auto put16 = [&](int off, uint16_t v) {
      rec[static_cast<size_t>(off)] = static_cast<uint8_t>(v & 0xff);
      rec[static_cast<size_t>(off) + 1] = static_cast<uint8_t>(v >> 8);
    };
    put16(0, p.x);
    put16(2, p.y);
    put16(4, p.z);
    put16(6, p.i);
    rec[8] = p.label;
    out.write(reinterpret_cast<const char*>(rec.data()), 9);
  }
  if (!out) throw runtime_failure("short write on " + path);
  json j;
  j["count"] = cloud.points.size();
  j["gate"] = {cloud.gate.lo, cloud.gate.hi};
  j["source_dims"] = {cloud.source_dims.z, cloud.source_dims.y, cloud.source_dims.x};
  j["has_labels"] = cloud.has_labels;
  auto dot = path.find_last_of('.');
  std::ofstream side((dot == std::string::npos ? path : path.substr(0, dot)) + ".json");
  side << j.dump(2) << "\n";
}

PointCloud load_cloud(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::ifstream side((dot == std::string::npos ? path : path.substr(0, dot)) + ".json");
  if (!side) throw validation_error("missing cloud sidecar for " + path);
  json j;
  side >> j;
  PointCloud cloud;
  const size_t count = j.at("count").get<size_t>();
  cloud.gate = Gate{j.at("gate")[0].get<int>(), j.at("gate")[1].get<int>()};
  cloud.source_dims = {j.at("source_dims")[0].get<int64_t>(), j.at("source_dims")[1].get<int64_t>(),
                       j.at("source_dims")[2].get<int64_t>()};
  cloud.has_labels = j.value("has_labels", false);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + path);
  std::vector<uint8_t> rec(9);
  cloud.points.reserve(count);
  for (size_t k = 0; k < count; k++) {
    in.read(reinterpret_cast<char*>(rec.data()), 9);
    if (!in) throw validation_error(path + ": truncated point records");
    auto get16 = [&](int off) {
      return static_cast<uint16_t>(rec[static_cast<size_t>(off)] | (rec[static_cast<size_t>(off) + 1] << 8));
    };
    Point p;
    p.x = get16(0);
    p.y = get16(2);
    p.z = get16(4);
    p.i = get16(6);
    p.label = rec[8];
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace ctscreen
