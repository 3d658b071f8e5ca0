#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

// Small sampling helpers on top of std::mt19937_64. The standard fully
// specifies the engine's output sequence but not the distribution adaptors,
// so the transforms below are spelled out to keep seeded runs reproducible
// across standard libraries.

namespace prbcount::detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t state = seed;
  std::uint64_t z = splitmix64(state);
  state = z ^ salt;
  return splitmix64(state);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Uniform double in [0, 1), 53 random bits.
template <class Engine>
double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <class Engine>
bool bernoulli(Engine& eng, double p) {
  return uniform01(eng) < p;
}

// Uniform integer in [lo, hi], both inclusive. Rejection keeps it unbiased.
template <class Engine>
std::int64_t uniform_int(Engine& eng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(eng());  // full 64-bit span
  const std::uint64_t reject_below = (0 - range) % range;   // 2^64 mod range
  for (;;) {
    const std::uint64_t x = eng();
    if (x >= reject_below) return lo + static_cast<std::int64_t>(x % range);
  }
}

// Standard normal via Box-Muller (cosine branch only).
template <class Engine>
double standard_normal(Engine& eng) {
  const double u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace prbcount::detail
