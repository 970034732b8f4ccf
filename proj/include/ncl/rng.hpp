#pragma once

#include <cstdint>

#include "ncl/types.hpp"

namespace ncl {

/// SplitMix64: counter-based 64-bit PRNG. Identical seed gives an identical
/// stream on every platform, which is what all reproducibility guarantees
/// in this codebase bottom out on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double gaussian();

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Derive an independent sub-seed. Consecutive calls yield distinct,
  /// well-mixed seeds; used to fan one config seed out to data generation,
  /// initialization, shuffling, and Monte-Carlo trials.
  std::uint64_t fork_seed() { return next_u64(); }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle of indices 0..n-1, driven by the given stream.
std::vector<Index> shuffled_indices(Index n, Rng& rng);

}  // namespace ncl
