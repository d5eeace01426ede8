#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace cbfrl {

using Rng = std::mt19937_64;

// SplitMix64 step; used to decorrelate seeds for independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a well-mixed seed for stream (a, b) of a base seed. Streams with
// distinct tags never collide in practice, which keeps e.g. training and
// evaluation episode seeds disjoint.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = base;
  std::uint64_t x = splitmix64(s);
  s ^= a * 0xd1342543de82ef95ULL;
  x ^= splitmix64(s);
  s ^= b * 0xaf251af3b0f025b5ULL;
  x ^= splitmix64(s);
  return x;
}

inline Rng make_rng(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return Rng(derive_seed(base, a, b));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// One pair of independent standard normals (Box-Muller). Stateless, so the
// stream position is always two draws per call.
inline Eigen::Vector2d normal_pair(Rng& rng) {
  double u1 = 1.0 - uniform01(rng);  // (0, 1]
  double u2 = uniform01(rng);
  double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

}  // namespace cbfrl
