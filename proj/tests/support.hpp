#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "fpsrm/field.hpp"

namespace fpsrm::testing {

inline Grid2D unit_grid(std::size_t n) { return square_grid(Domain{}, n); }

inline ScalarField random_field(const Grid2D& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ScalarField f(g);
  for (double& v : f.values()) v = dist(rng);
  return f;
}

/// Sum of a few low-frequency cosines with random phases and amplitudes.
inline ScalarField random_smooth_field(const Grid2D& g, std::uint64_t seed, double amplitude = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Mode {
    double a, kx, ky, phase;
  };
  Mode modes[4];
  for (Mode& m : modes) {
    m.a = amplitude * (2.0 * unit(rng) - 1.0);
    m.kx = 0.2 + 0.8 * unit(rng);
    m.ky = 0.2 + 0.8 * unit(rng);
    m.phase = 6.283185307179586 * unit(rng);
  }
  return ScalarField::sample(g, [&](double x, double y) {
    double v = 0.0;
    for (const Mode& m : modes) v += m.a * std::cos(m.kx * x + m.ky * y + m.phase);
    return v;
  });
}

/// Positive density with unit mass.
inline ScalarField random_density(const Grid2D& g, std::uint64_t seed) {
  ScalarField f = random_field(g, seed, 0.2, 1.0);
  f *= 1.0 / integrate(f);
  return f;
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double max_abs(const ScalarField& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace fpsrm::testing
