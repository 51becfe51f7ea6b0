#pragma once

#include "fpsrm/field.hpp"

namespace fpsrm {

/// Laboratory scales: l_tilde in um, domain side l in u, D in um^2/s.
struct LabUnits {
  double l_tilde = 10.0;
  double l = 6.0;
  double diffusion = 0.1;
  double pixel_size = 0.02;  ///< um per pixel

  void validate() const;
};

/// Concentric-ring test pattern A (1 + cos(2 pi (x^2 + y^2) / (d l))).
struct TargetSpec {
  double amplitude = 0.05;  ///< semi-amplitude A
  double d = 1.0 / 20.0;    ///< ring-spacing fraction of the domain side
  double l = 6.0;

  void validate() const;
};

/// Cosine similarity of the flattened value vectors. Throws on a zero vector.
double cross_correlation(const ScalarField& a, const ScalarField& b);

/// Resamples the reference onto the reconstruction grid (box average when
/// coarsening), min-max scales both, and returns their cross-correlation.
double compare_to_reference(const ScalarField& reconstruction, const ScalarField& reference);

ScalarField make_target(const TargetSpec& spec, const Grid2D& grid);

/// sigma = (l / l_tilde) sqrt(2 D), in sqrt(u)/s.
double sigma_from_lab(const LabUnits& units);

/// U (l_tilde / l)^2 / D, in units of k_B T.
double potential_to_kbt(double potential_depth, const LabUnits& units);

constexpr double kResolutionThreshold = 0.8;

/// Resolved iff cc >= threshold.
bool resolution_verdict(double cc, double threshold = kResolutionThreshold);

}  // namespace fpsrm
