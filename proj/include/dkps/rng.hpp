// SPDX-License-Identifier: Apache-2.0
//
// Seeded RNG with explicit uniform/normal/sampling implementations.
// std::*_distribution is implementation-defined, so every draw here is
// spelled out to keep streams identical across stdlib versions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dkps/errors.hpp"

namespace dkps {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent stream seed for (base, tag, index). Trial seeds in the
// evaluation harness are the plain `base + trial` convention instead; this
// is for auxiliary streams that must not collide with them.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64(s);
  s = h ^ (tag * 0xD1B54A32D192ED03ULL);
  h = splitmix64(s);
  s = h ^ (index * 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; two fresh uniforms per draw.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Unbiased uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InvalidArgument("Rng::below: zero bound");
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  int below_int(int bound) { return static_cast<int>(below(static_cast<std::uint64_t>(bound))); }

  // k distinct indices from [0, universe), ascending.
  std::vector<int> sample_indices(int universe, int k) {
    if (k < 0 || k > universe)
      throw InvalidArgument("Rng::sample_indices: k outside [0, universe]");
    std::vector<int> idx(static_cast<std::size_t>(universe));
    for (int i = 0; i < universe; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + below_int(universe - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dkps
