#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qst {

// Counter-based random streams: every (seed, stream, draw) triple maps
// to the same value regardless of scheduling, so parallel phantom
// generation is reproducible bit-for-bit.
namespace rng {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t keyed(uint64_t seed, uint64_t stream, uint64_t counter) {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double uniform_pos(uint64_t seed, uint64_t stream, uint64_t counter) {
  const uint64_t bits = keyed(seed, stream, counter) >> 11;  // 53 bits
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

// Independent standard normal pair via Box-Muller.
inline void gaussian_pair(uint64_t seed, uint64_t stream, uint64_t counter, double& z1,
                          double& z2) {
  const double u1 = uniform_pos(seed, stream, 2 * counter);
  const double u2 = uniform_pos(seed, stream, 2 * counter + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  z1 = r * std::cos(2.0 * std::numbers::pi * u2);
  z2 = r * std::sin(2.0 * std::numbers::pi * u2);
}

}  // namespace rng
}  // namespace qst
