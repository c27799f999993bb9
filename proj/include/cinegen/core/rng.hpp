#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "cinegen/core/tensor.hpp"

namespace cinegen {

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 14695981039346656037ull) {
  return fnv1a64(s.data(), s.size(), h);
}

/// Fans a root seed out to per-stage seeds; recorded in run logs so partial
/// reruns stay reproducible.
inline uint64_t derive_seed(uint64_t root, std::string_view label, uint64_t counter = 0) {
  uint64_t h = fnv1a64(&root, sizeof(root));
  h = fnv1a64(label, h);
  h = fnv1a64(&counter, sizeof(counter), h);
  return h;
}

/// Deterministic RNG. std::distributions are implementation-defined, so
/// uniform and normal draws are generated explicitly.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] via rejection-free scaling (toy-scale ranges).
  int64_t uniform_int(int64_t lo, int64_t hi) {
    check(hi >= lo, "uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(gen_() % span);
  }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  void fill_normal(Tensor& t, double mean = 0.0, double stddev = 1.0) {
    for (Eigen::Index i = 0; i < t.numel(); ++i) t.data()[i] = mean + stddev * normal();
  }

  void fill_normal(ArrayX& a, double mean = 0.0, double stddev = 1.0) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = mean + stddev * normal();
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Deterministic standard-normal value keyed by integers; used for fixed
/// random projections that never live in memory.
inline double hash_normal(uint64_t a, uint64_t b, uint64_t seed) {
  uint64_t h = fnv1a64(&a, sizeof(a), 14695981039346656037ull);
  h = fnv1a64(&b, sizeof(b), h);
  h = fnv1a64(&seed, sizeof(seed), h);
  // two 32-bit halves -> Box-Muller
  const double u1 = (static_cast<double>(h >> 32) + 1.0) * 0x1.0p-32;
  const double u2 = static_cast<double>(h & 0xffffffffull) * 0x1.0p-32;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace cinegen
