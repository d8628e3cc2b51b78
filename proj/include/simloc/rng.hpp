#pragma once

#include <cstdint>
#include <limits>

namespace simloc {

/// SplitMix64 generator. Small state, so one instance per Monte Carlo sample
/// is cheap; streams are keyed by (seed, index) through `derive_seed`.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed for stream `index` of a master seed. Distinct (seed, index) pairs give
/// statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Uniform double in [0, 1).
double uniform01(SplitMix64& rng) noexcept;

/// Standard normal draw.
double standard_normal(SplitMix64& rng) noexcept;

}  // namespace simloc
