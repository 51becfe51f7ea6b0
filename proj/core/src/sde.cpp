#include "fpsrm/sde.hpp"

#include <cmath>
#include <stdexcept>

namespace fpsrm {

void SdeConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("SdeConfig: tau must be positive");
  if (!(sigma_mc >= 0.0)) throw std::invalid_argument("SdeConfig: sigma_mc must be nonnegative");
  if (n_particles < 1) throw std::invalid_argument("SdeConfig: need at least one particle");
  if (n_frames < 2) throw std::invalid_argument("SdeConfig: need at least two frames");
  if (substeps_per_frame < 1) throw std::invalid_argument("SdeConfig: substeps_per_frame must be >= 1");
}

DriftField drift_from_potential(const ScalarField& potential) {
  auto [gx, gy] = gradient_central(potential);
  gx *= -1.0;
  gy *= -1.0;
  if (!gx.all_finite() || !gy.all_finite())
    throw std::domain_error("drift_from_potential: non-finite drift values");
  return {std::move(gx), std::move(gy)};
}

namespace {
double reflect_axis(double v, double lo, double hi) {
  while (v < lo || v > hi) {
    if (v > hi) v = 2.0 * hi - v;
    if (v < lo) v = 2.0 * lo - v;
  }
  return v;
}
}  // namespace

Point reflect(Point p, const Domain& domain) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::domain_error("reflect: non-finite position");
  return {reflect_axis(p.x, domain.x_min, domain.x_max), reflect_axis(p.y, domain.y_min, domain.y_max)};
}

ParticleEnsemble em_step(const ParticleEnsemble& ensemble, const DriftField& drift, double sigma,
                         double tau, const CounterRng& rng, std::uint64_t step,
                         const Domain& domain) {
  if (!(tau > 0.0)) throw std::invalid_argument("em_step: tau must be positive");
  if (!(drift.bx.grid() == drift.by.grid())) throw std::invalid_argument("em_step: drift grid mismatch");
  const double noise = sigma * std::sqrt(tau);
  ParticleEnsemble out;
  out.positions.resize(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const Point p = ensemble.positions[k];
    const double bx = interp_bilinear(drift.bx, p.x, p.y);
    const double by = interp_bilinear(drift.by, p.x, p.y);
    if (!std::isfinite(bx) || !std::isfinite(by)) throw std::domain_error("em_step: non-finite drift");
    Point q{p.x + bx * tau, p.y + by * tau};
    if (noise != 0.0) {
      const auto [z1, z2] = rng.normal_pair(k, step);
      q.x += noise * z1;
      q.y += noise * z2;
    }
    out.positions[k] = reflect(q, domain);
  }
  return out;
}

TrajectoryFrames simulate(const SdeConfig& config, const ScalarField& potential) {
  config.validate();
  if (!(potential.grid().domain() == config.domain))
    throw std::invalid_argument("simulate: potential grid does not cover the simulation domain");
  const DriftField drift = drift_from_potential(potential);
  const CounterRng rng(config.seed);
  const Domain& d = config.domain;

  // Stream ids >= n_particles are reserved for the initial placement so they
  // never collide with the per-particle noise streams.
  const std::uint64_t init_stream = config.n_particles;
  ParticleEnsemble current;
  current.positions.resize(config.n_particles);
  for (std::size_t k = 0; k < config.n_particles; ++k) {
    current.positions[k] = {d.x_min + d.width() * rng.uniform(init_stream + k, 0),
                            d.y_min + d.height() * rng.uniform(init_stream + k, 1)};
  }

  TrajectoryFrames out;
  out.dt = config.frame_dt();
  out.domain = d;
  out.frames.reserve(config.n_frames);
  out.frames.push_back(current);
  std::uint64_t step = 0;
  for (std::size_t f = 1; f < config.n_frames; ++f) {
    for (std::size_t s = 0; s < config.substeps_per_frame; ++s)
      current = em_step(current, drift, config.sigma_mc, config.tau, rng, step++, d);
    out.frames.push_back(current);
  }
  return out;
}

}  // namespace fpsrm
