#pragma once

#include <cstdint>

namespace widthlab {

// Deterministic generator with cheap keyed substreams. Every randomized routine
// in the library derives one substream per independent work item (trial, column,
// restart), so results are reproducible bit-for-bit regardless of worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Substream keyed by (seed, stream). Streams with distinct keys are
  // decorrelated through a SplitMix64 avalanche of the pair.
  static Rng stream(std::uint64_t seed, std::uint64_t stream);
  static Rng stream(std::uint64_t seed, std::uint64_t stream_hi, std::uint64_t stream_lo);

  std::uint64_t next_u64();
  // Uniform on [0,1), 53-bit resolution.
  double next_double();
  // Uniform on {0,...,n-1} without modulo bias.
  std::uint64_t next_below(std::uint64_t n);
  // Standard normal via Box-Muller; pairs cached.
  double next_gaussian();
  // Fair +1/-1.
  double next_sign();

 private:
  std::uint64_t s_[4];
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace widthlab
