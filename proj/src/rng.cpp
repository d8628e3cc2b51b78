#include "simloc/rng.hpp"

#include <random>

namespace simloc {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  SplitMix64 mix(seed ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  mix();
  return mix();
}

double uniform01(SplitMix64& rng) noexcept {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double standard_normal(SplitMix64& rng) noexcept {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace simloc
