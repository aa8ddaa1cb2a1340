#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "frg/core.hpp"

namespace frg {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to turn structured indices into seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t head,
                                    Rest... rest) {
  return derive_seed(mix64(base) ^ head, rest...);
}

/// Uniform double in [0, 1) with 53 random bits. Hand-rolled so results do
/// not depend on the standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  // Rejection sampling on the top bits keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal via the polar method (no state carried between calls).
inline double sample_normal(Rng& rng) {
  while (true) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

/// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
inline double sample_gamma(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = uniform01(rng);
    return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// Index drawn from an (unnormalized) nonnegative weight vector.
template <typename Derived>
Index sample_categorical(Rng& rng, const Eigen::MatrixBase<Derived>& weights) {
  const double total = weights.sum();
  double u = uniform01(rng) * total;
  for (Index i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;
}

/// Dirichlet draw with the given concentration parameters (all > 0).
template <typename Scalar>
VectorX<Scalar> sample_dirichlet(Rng& rng, const VectorX<Scalar>& alpha) {
  VectorX<Scalar> out(alpha.size());
  for (Index i = 0; i < alpha.size(); ++i)
    out[i] = static_cast<Scalar>(sample_gamma(rng, static_cast<double>(alpha[i])));
  out /= out.sum();
  return out;
}

}  // namespace frg
