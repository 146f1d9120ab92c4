#pragma once

#include <cstdint>
#include <random>

namespace camd {

/// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Stable seed derivation: child streams never collide with the parent's.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(mix64(base) ^ (index + 0x632be59bd9b4e019ull));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

/// Uniform draw on (0,1]; never returns exactly 0.
inline double uniform_unit(std::mt19937_64& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u > 0.0 ? u : std::numeric_limits<double>::min();
}

}  // namespace camd
