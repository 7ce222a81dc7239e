#include "ctscreen/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ctscreen {

using nlohmann::json;

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

VoxelGrid make_grid(Vec3i dims, Spacing spacing, float fill) {
  if (dims.z <= 0 || dims.y <= 0 || dims.x <= 0) throw validation_error("volume dims must be positive");
  if (spacing.z <= 0 || spacing.y <= 0 || spacing.x <= 0) throw validation_error("voxel spacing must be positive");
  VoxelGrid g;
  g.dims = dims;
  g.spacing_mm = spacing;
  g.data.assign(static_cast<size_t>(voxel_count(dims)), fill);
  return g;
}

LabelVolume make_labels(Vec3i dims, uint8_t fill) {
  if (dims.z <= 0 || dims.y <= 0 || dims.x <= 0) throw validation_error("label dims must be positive");
  if (fill >= kNumClasses) throw validation_error("label fill out of range");
  LabelVolume l;
  l.dims = dims;
  l.data.assign(static_cast<size_t>(voxel_count(dims)), fill);
  return l;
}

namespace {

std::string sidecar_path(const std::string& payload_path) {
  auto dot = payload_path.find_last_of('.');
  std::string stem = (dot == std::string::npos) ? payload_path : payload_path.substr(0, dot);
  return stem + ".json";
}

struct Sidecar {
  Vec3i dims;
  Spacing spacing;
  std::string unit;
};

Sidecar load_sidecar(const std::string& payload_path) {
  const std::string path = sidecar_path(payload_path);
  std::ifstream in(path);
  if (!in) throw validation_error("missing sidecar: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error("corrupt sidecar " + path + ": " + e.what());
  }
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3)
    throw validation_error("sidecar " + path + " lacks dims[3]");
  Sidecar sc;
  sc.dims = {j["dims"][0].get<int64_t>(), j["dims"][1].get<int64_t>(), j["dims"][2].get<int64_t>()};
  if (sc.dims.z <= 0 || sc.dims.y <= 0 || sc.dims.x <= 0)
    throw validation_error("sidecar " + path + " has non-positive dims");
  if (j.contains("spacing_mm")) {
    if (!j["spacing_mm"].is_array() || j["spacing_mm"].size() != 3)
      throw validation_error("sidecar " + path + " spacing_mm must have 3 entries");
    sc.spacing = {j["spacing_mm"][0].get<double>(), j["spacing_mm"][1].get<double>(), j["spacing_mm"][2].get<double>()};
    if (sc.spacing.z <= 0 || sc.spacing.y <= 0 || sc.spacing.x <= 0)
      throw validation_error("sidecar " + path + " has non-positive spacing");
  }
  sc.unit = j.value("unit", "");
  return sc;
}

void save_sidecar(const std::string& payload_path, Vec3i dims, Spacing spacing, const std::string& unit) {
  json j;
  j["dims"] = {dims.z, dims.y, dims.x};
  j["spacing_mm"] = {spacing.z, spacing.y, spacing.x};
  j["unit"] = unit;
  std::ofstream out(sidecar_path(payload_path));
  if (!out) throw runtime_failure("cannot write sidecar for " + payload_path);
  out << j.dump(2) << "\n";
}

std::vector<uint8_t> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + path);
  in.seekg(0, std::ios::end);
  auto n = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!in) throw validation_error("short read on " + path);
  return bytes;
}

}  // namespace

VoxelGrid load_volume(const std::string& vol_path) {
  Sidecar sc = load_sidecar(vol_path);
  const int64_t n = voxel_count(sc.dims);
  std::vector<uint8_t> bytes = read_all_bytes(vol_path);
  if (bytes.size() != static_cast<size_t>(n) * 2) {
    throw validation_error(vol_path + ": payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(n * 2) + " for dims " + std::to_string(sc.dims.z) + "x" +
                           std::to_string(sc.dims.y) + "x" + std::to_string(sc.dims.x));
  }
  VoxelGrid g;
  g.dims = sc.dims;
  g.spacing_mm = sc.spacing;
  g.data.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; i++) {
    const uint16_t v = static_cast<uint16_t>(bytes[2 * i]) | (static_cast<uint16_t>(bytes[2 * i + 1]) << 8);
    if (v > 32767) {
      throw validation_error(vol_path + ": intensity " + std::to_string(v) + " out of [0,32767] at voxel " +
                             std::to_string(i));
    }
    g.data[i] = static_cast<float>(v);
  }
  return g;
}

void save_volume(const VoxelGrid& grid, const std::string& vol_path) {
  std::ofstream out(vol_path, std::ios::binary);
  if (!out) throw runtime_failure("cannot write " + vol_path);
  std::vector<uint8_t> bytes(grid.data.size() * 2);
  for (size_t i = 0; i < grid.data.size(); i++) {
    const float f = grid.data[i];
    if (!(f >= 0.0f && f <= kMaxIntensity))
      throw validation_error("intensity " + std::to_string(f) + " out of [0,32767] at voxel " + std::to_string(i));
    const uint16_t v = static_cast<uint16_t>(std::lround(f));
    bytes[2 * i] = static_cast<uint8_t>(v & 0xff);
    bytes[2 * i + 1] = static_cast<uint8_t>(v >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw runtime_failure("short write on " + vol_path);
  save_sidecar(vol_path, grid.dims, grid.spacing_mm, "MHU");
}

LabelVolume load_labels(const std::string& lbl_path) {
  Sidecar sc = load_sidecar(lbl_path);
  const int64_t n = voxel_count(sc.dims);
  std::vector<uint8_t> bytes = read_all_bytes(lbl_path);
  if (bytes.size() != static_cast<size_t>(n)) {
    throw validation_error(lbl_path + ": payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(n));
  }
  for (int64_t i = 0; i < n; i++) {
    if (bytes[i] >= kNumClasses)
      throw validation_error(lbl_path + ": class " + std::to_string(bytes[i]) + " out of range at voxel " +
                             std::to_string(i));
  }
  LabelVolume l;
  l.dims = sc.dims;
  l.data = std::move(bytes);
  return l;
}

void save_labels(const LabelVolume& labels, const std::string& lbl_path) {
  std::ofstream out(lbl_path, std::ios::binary);
  if (!out) throw runtime_failure("cannot write " + lbl_path);
  out.write(reinterpret_cast<const char*>(labels.data.data()), static_cast<std::streamsize>(labels.data.size()));
  if (!out) throw runtime_failure("short write on " + lbl_path);
  save_sidecar(lbl_path, labels.dims, Spacing{}, "class");
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open manifest " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error("corrupt manifest " + path + ": " + e.what());
  }
  if (!j.is_array()) throw validation_error("manifest must be a JSON list");
  std::vector<ManifestEntry> entries;
  for (const auto& item : j) {
    ManifestEntry e;
    e.volume = item.at("volume").get<std::string>();
    e.labels = item.at("labels").get<std::string>();
    e.split = item.at("split").get<std::string>();
    if (e.split != "odd" && e.split != "even")
      throw validation_error("manifest split must be \"odd\" or \"even\", got \"" + e.split + "\"");
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  json j = json::array();
  for (const auto& e : entries) j.push_back({{"volume", e.volume}, {"labels", e.labels}, {"split", e.split}});
  std::ofstream out(path);
  if (!out) throw runtime_failure("cannot write manifest " + path);
  out << j.dump(2) << "\n";
}

namespace {

void check_factor(int factor) {
  if (factor != 2 && factor != 4 && factor != 8)
    throw validation_error("downsampling factor must be one of {2,4,8}, got " + std::to_string(factor));
}

Vec3i ceil_div_dims(Vec3i dims, int factor) {
  return {(dims.z + factor - 1) / factor, (dims.y + factor - 1) / factor, (dims.x + factor - 1) / factor};
}

}  // namespace

VoxelGrid downsample(const VoxelGrid& grid, int factor) {
  check_factor(factor);
  const Vec3i od = ceil_div_dims(grid.dims, factor);
  VoxelGrid out = make_grid(od, {grid.spacing_mm.z * factor, grid.spacing_mm.y * factor, grid.spacing_mm.x * factor});
  const double inv = 1.0 / (static_cast<double>(factor) * factor * factor);
  for (int64_t z = 0; z < od.z; z++)
    for (int64_t y = 0; y < od.y; y++)
      for (int64_t x = 0; x < od.x; x++) {
        double sum = 0.0;  // out-of-bounds voxels contribute air (0)
        const int64_t z1 = std::min(grid.dims.z, (z + 1) * factor);
        const int64_t y1 = std::min(grid.dims.y, (y + 1) * factor);
        const int64_t x1 = std::min(grid.dims.x, (x + 1) * factor);
        for (int64_t iz = z * factor; iz < z1; iz++)
          for (int64_t iy = y * factor; iy < y1; iy++)
            for (int64_t ix = x * factor; ix < x1; ix++) sum += grid.at(iz, iy, ix);
        out.at(z, y, x) = static_cast<float>(sum * inv);
      }
  return out;
}

LabelVolume downsample_labels(const LabelVolume& labels, int factor) {
  check_factor(factor);
  const Vec3i od = ceil_div_dims(labels.dims, factor);
  LabelVolume out = make_labels(od);
  const int64_t block = static_cast<int64_t>(factor) * factor * factor;
  for (int64_t z = 0; z < od.z; z++)
    for (int64_t y = 0; y < od.y; y++)
      for (int64_t x = 0; x < od.x; x++) {
        std::array<int64_t, kNumClasses> count{};
        const int64_t z1 = std::min(labels.dims.z, (z + 1) * factor);
        const int64_t y1 = std::min(labels.dims.y, (y + 1) * factor);
        const int64_t x1 = std::min(labels.dims.x, (x + 1) * factor);
        int64_t inside = 0;
        for (int64_t iz = z * factor; iz < z1; iz++)
          for (int64_t iy = y * factor; iy < y1; iy++)
            for (int64_t ix = x * factor; ix < x1; ix++) {
              count[labels.at(iz, iy, ix)]++;
              inside++;
            }
        count[0] += block - inside;  // padding votes background
        const int64_t best = *std::max_element(count.begin(), count.end());
        // ties prefer foreground over background, then the smaller index
        uint8_t winner = 0;
        for (int c = 1; c < kNumClasses; c++)
          if (count[c] == best) {
            winner = static_cast<uint8_t>(c);
            break;
          }
        out.at(z, y, x) = winner;
      }
  return out;
}

LabelVolume upsample_labels(const LabelVolume& labels, Vec3i target_dims) {
  if (target_dims.z < labels.dims.z || target_dims.y < labels.dims.y || target_dims.x < labels.dims.x)
    throw validation_error("upsample target dims must be >= source dims");
  LabelVolume out = make_labels(target_dims);
  for (int64_t z = 0; z < target_dims.z; z++) {
    const int64_t sz = z * labels.dims.z / target_dims.z;
    for (int64_t y = 0; y < target_dims.y; y++) {
      const int64_t sy = y * labels.dims.y / target_dims.y;
      for (int64_t x = 0; x < target_dims.x; x++) {
        const int64_t sx = x * labels.dims.x / target_dims.x;
        out.at(z, y, x) = labels.at(sz, sy, sx);
      }
    }
  }
  return out;
}

std::pair<VoxelGrid, LabelVolume> crop(const VoxelGrid& grid, const LabelVolume& labels, const CropSpec& spec) {
  if (grid.dims != labels.dims) throw validation_error("crop: grid/label dims differ");
  if (spec.size.z <= 0 || spec.size.y <= 0 || spec.size.x <= 0) throw validation_error("crop size must be positive");
  auto clamp_origin = [](int64_t o, int64_t dim, int64_t size) {
    return std::clamp<int64_t>(o, 0, std::max<int64_t>(dim - size, 0));
  };
  const Vec3i o = {clamp_origin(spec.origin.z, grid.dims.z, spec.size.z),
                   clamp_origin(spec.origin.y, grid.dims.y, spec.size.y),
                   clamp_origin(spec.origin.x, grid.dims.x, spec.size.x)};
  VoxelGrid gout = make_grid(spec.size, grid.spacing_mm);
  LabelVolume lout = make_labels(spec.size);
  for (int64_t z = 0; z < spec.size.z; z++)
    for (int64_t y = 0; y < spec.size.y; y++)
      for (int64_t x = 0; x < spec.size.x; x++) {
        const int64_t sz = o.z + z, sy = o.y + y, sx = o.x + x;
        if (in_bounds(grid.dims, sz, sy, sx)) {
          gout.at(z, y, x) = grid.at(sz, sy, sx);
          lout.at(z, y, x) = labels.at(sz, sy, sx);
        }  // else stays air / background
      }
  return {std::move(gout), std::move(lout)};
}

AugmentParams draw_augment_params(Rng& rng, bool in_plane_square) {
  AugmentParams p;
  p.flip_z = rng.coin();
  p.flip_y = rng.coin();
  p.flip_x = rng.coin();
  int k = static_cast<int>(rng.uniform_int(4));
  if (!in_plane_square && (k % 2) == 1) k = (k + 1) % 4;  // odd turns need ny == nx
  p.rot90_k = k;
  return p;
}

void normalise_intensity(VoxelGrid& grid) {
  double sum = 0.0, sumsq = 0.0;
  for (float v : grid.data) {
    sum += v;
    sumsq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(grid.data.size());
  const double mean = sum / n;
  const double var = std::max(sumsq / n - mean * mean, 0.0);
  const float inv_std = static_cast<float>(1.0 / std::sqrt(var + 1e-6));
  const float fmean = static_cast<float>(mean);
  for (float& v : grid.data) v = (v - fmean) * inv_std;
}

std::pair<VoxelGrid, LabelVolume> apply_augment(const VoxelGrid& grid, const LabelVolume& labels,
                                                const AugmentParams& params) {
  if (grid.dims != labels.dims) throw validation_error("augment: grid/label dims differ");
  if ((params.rot90_k % 2) == 1 && grid.dims.y != grid.dims.x)
    throw validation_error("odd quarter turns require square in-plane dims");
  const Vec3i d = grid.dims;
  VoxelGrid gout = make_grid(d, grid.spacing_mm);
  LabelVolume lout = make_labels(d);
  // Destination (z,y,x) reads from the source voxel obtained by undoing the
  // transform: first the rotation (about the slice centre), then the flips.
  for (int64_t z = 0; z < d.z; z++)
    for (int64_t y = 0; y < d.y; y++)
      for (int64_t x = 0; x < d.x; x++) {
        int64_t sy = y, sx = x;
        // inverse of a counter-clockwise quarter turn (y,x) -> (x, ny-1-y)
        for (int k = 0; k < params.rot90_k; k++) {
          const int64_t ty = sy;
          sy = d.y - 1 - sx;
          sx = ty;
        }
        int64_t sz = params.flip_z ? d.z - 1 - z : z;
        if (params.flip_y) sy = d.y - 1 - sy;
        if (params.flip_x) sx = d.x - 1 - sx;
        gout.at(z, y, x) = grid.at(sz, sy, sx);
        lout.at(z, y, x) = labels.at(sz, sy, sx);
      }
  if (params.normalise) normalise_intensity(gout);
  return {std::move(gout), std::move(lout)};
}

std::pair<VoxelGrid, LabelVolume> augment(const VoxelGrid& grid, const LabelVolume& labels, uint64_t seed) {
  Rng rng(seed);
  const AugmentParams p = draw_augment_params(rng, grid.dims.y == grid.dims.x);
  return apply_augment(grid, labels, p);
}

}  // namespace ctscreen
