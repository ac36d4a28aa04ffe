// SPDX-License-Identifier: Apache-2.0
//
// Distribution transforms over std::mt19937. The engine itself is specified
// bit-exactly by the standard; std::*_distribution is not, so we roll our
// own transforms to keep generated datasets identical across toolchains.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace xrmbt::rngu {

/// Uniform double in [0, 1), 53 random bits.
inline double canonical(std::mt19937& g) {
  const std::uint64_t hi = g();
  const std::uint64_t lo = g();
  return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937& g, double a, double b) {
  return a + (b - a) * canonical(g);
}

/// Standard normal via Box-Muller (cosine branch only; stateless).
inline double normal(std::mt19937& g) {
  double u1 = canonical(g);
  const double u2 = canonical(g);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline bool bernoulli(std::mt19937& g, double p) { return canonical(g) < p; }

/// Index draw with probability weights[i] / sum(weights).
inline int discrete(std::mt19937& g, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative weight in discrete draw");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("discrete draw needs positive total weight");
  double r = canonical(g) * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;  // r landed on the top edge
}

inline int uniform_int(std::mt19937& g, int lo, int hi) {  // inclusive range
  return lo + static_cast<int>(canonical(g) * (static_cast<double>(hi) - lo + 1));
}

/// Uniform direction on the unit sphere.
template <typename V>
inline V sphere_dir(std::mt19937& g) {
  const double z = uniform(g, -1.0, 1.0);
  const double phi = uniform(g, 0.0, 6.283185307179586);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  using S = decltype(V{}.x);
  return V(static_cast<S>(r * std::cos(phi)), static_cast<S>(r * std::sin(phi)),
           static_cast<S>(z));
}

}  // namespace xrmbt::rngu
