#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace vrnnaug {

/// Deterministic pseudo-random stream (xoshiro256++ seeded via splitmix64).
///
/// The generator and the Gaussian sampler are implemented here rather than
/// with <random> distributions so that a given seed produces the same draw
/// sequence under every standard library. Substreams are derived by hashing
/// a tag into the parent seed, which lets independent consumers (per-epoch
/// shuffles, per-trajectory noise, ...) own non-overlapping streams without
/// sharing mutable state.
class RngStream {
 public:
  explicit RngStream(uint64_t seed);

  RngStream substream(std::string_view tag) const;
  RngStream substream(uint64_t index) const;

  uint64_t next_u64();
  /// Uniform double in [0, 1).
  double uniform01();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (pairs cached).
  double normal();
  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  uint64_t state_[4] = {0, 0, 0, 0};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace vrnnaug
