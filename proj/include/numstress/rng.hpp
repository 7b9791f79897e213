#pragma once

#include <cmath>
#include <cstdint>

namespace numstress {

// SplitMix64 generator (Steele/Lea/Flood-Burton finalizer).
//
// Update rule, applied per draw:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Reference stream for seed 0:
//   0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
//
// No <random> distributions anywhere: every derived value (uniform, gaussian,
// splits) is defined purely in terms of this stream so runs replay
// bit-for-bit on any platform or language binding.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Child generator seeded from this stream; detaches the child sequence
  // from later draws on the parent.
  SplitMix64 split() { return SplitMix64(next_u64()); }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Standard normal via Box-Muller; consumes exactly two draws per call
  // (cosine branch only, nothing cached), so the stream position is a pure
  // function of the call count.
  double next_gaussian() {
    double u1 = 1.0 - next_unit();  // (0, 1]: keeps log() finite
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::uint64_t state_;
};

// Deterministic seed folding for per-cell streams (sweep grids, worker
// shards). Boost-style combine followed by one SplitMix64 step.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return SplitMix64(h).next_u64();
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

}  // namespace numstress
