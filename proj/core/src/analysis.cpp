#include "fpsrm/analysis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fpsrm {

void LabUnits::validate() const {
  if (!(l_tilde > 0.0) || !(l > 0.0) || !(diffusion >= 0.0) || !(pixel_size > 0.0))
    throw std::invalid_argument("LabUnits: lengths must be positive and D nonnegative");
}

void TargetSpec::validate() const {
  if (!(amplitude > 0.0)) throw std::invalid_argument("TargetSpec: amplitude must be positive");
  if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("TargetSpec: d must lie in (0,1)");
  if (!(l > 0.0)) throw std::invalid_argument("TargetSpec: l must be positive");
}

double cross_correlation(const ScalarField& a, const ScalarField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cross_correlation: size mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) throw std::invalid_argument("cross_correlation: zero-norm input");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double compare_to_reference(const ScalarField& reconstruction, const ScalarField& reference) {
  const ScalarField ref = resample(reference, reconstruction.grid());
  return cross_correlation(min_max_scale(reconstruction).field, min_max_scale(ref).field);
}

ScalarField make_target(const TargetSpec& spec, const Grid2D& grid) {
  spec.validate();
  const double k = 2.0 * std::numbers::pi / (spec.d * spec.l);
  return ScalarField::sample(grid, [&](double x, double y) {
    return spec.amplitude * (1.0 + std::cos(k * (x * x + y * y)));
  });
}

double sigma_from_lab(const LabUnits& units) {
  units.validate();
  return units.l / units.l_tilde * std::sqrt(2.0 * units.diffusion);
}

double potential_to_kbt(double potential_depth, const LabUnits& units) {
  units.validate();
  if (units.diffusion == 0.0) throw std::invalid_argument("potential_to_kbt: D must be nonzero");
  const double ratio = units.l_tilde / units.l;
  return potential_depth * ratio * ratio / units.diffusion;
}

bool resolution_verdict(double cc, double threshold) { return cc >= threshold; }

}  // namespace fpsrm
