#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ctscreen {

// Thrown for bad inputs: malformed files, out-of-range config values,
// mismatched shapes. CLI maps this to exit code 1.
class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for failures at run time: non-finite loss, I/O errors mid-run.
// CLI maps this to exit code 2.
class runtime_failure : public std::runtime_error {
public:
  explicit runtime_failure(const std::string& msg) : std::runtime_error(msg) {}
};

// Voxel index triple, always ordered (z, y, x) to match storage order.
struct Vec3i {
  int64_t z = 0, y = 0, x = 0;

  friend bool operator==(const Vec3i&, const Vec3i&) = default;
};

inline int64_t voxel_count(const Vec3i& dims) { return dims.z * dims.y * dims.x; }

inline int64_t linear_index(const Vec3i& dims, int64_t z, int64_t y, int64_t x) {
  return (z * dims.y + y) * dims.x + x;
}

inline bool in_bounds(const Vec3i& dims, int64_t z, int64_t y, int64_t x) {
  return z >= 0 && z < dims.z && y >= 0 && y < dims.y && x >= 0 && x < dims.x;
}

// Millimetres per voxel, (dz, dy, dx).
struct Spacing {
  double z = 1.0, y = 1.0, x = 1.0;

  double voxel_volume_mm3() const { return z * y * x; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

// splitmix64, used to derive independent sub-seeds from one master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d649bb133111ebull;
  return x ^ (x >> 31);
}

// Seeded RNG stream. Caller-owned; never global.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derive an independent stream for a named purpose.
  static Rng derive(uint64_t seed, uint64_t tag) { return Rng(splitmix64(seed ^ (tag * 0x9e3779b97f4a7c15ull))); }

  uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    return n <= 1 ? 0 : static_cast<int64_t>(std::uniform_int_distribution<uint64_t>(0, static_cast<uint64_t>(n) - 1)(engine_));
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double sigma) { return std::normal_distribution<double>(mean, sigma)(engine_); }
  bool coin() { return (engine_() & 1ull) != 0; }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

// FNV-1a over a byte string; stable across builds, used for config hashes.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v);

}  // namespace ctscreen
