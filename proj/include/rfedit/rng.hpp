#pragma once

#include <cstdint>
#include <vector>

#include "rfedit/common.hpp"

namespace rfedit {

/// Deterministic, splittable random stream (splitmix64 counter generator).
///
/// Every consumer derives its own child stream from a stable path of integer
/// tags (e.g. per step, per batch sample), so results never depend on how work
/// is ordered or distributed across workers. Construction is a single word of
/// state, so per-sample substreams cost nothing. Uniform and normal draws are
/// pinned here (53-bit uniforms, Box-Muller normals) instead of relying on
/// std::*_distribution, whose output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : base_(seed), state_(scramble(seed)) {}

  /// Child stream identified by (a, b); independent of this stream's usage.
  RngStream child(std::uint64_t a, std::uint64_t b = 0) const {
    return RngStream(mix(mix(base_, a + 1), b + 1));
  }

  std::uint64_t base_seed() const { return base_; }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 < 1, so log1p(-u1) is finite
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vec gaussian(Eigen::Index n) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
    return out;
  }

  /// Index drawn proportionally to the given non-negative weights.
  std::size_t pick(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    return splitmix(h ^ (v * 0x9e3779b97f4a7c15ULL));
  }

  static std::uint64_t scramble(std::uint64_t seed) { return splitmix(seed); }

  std::uint64_t base_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rfedit
