#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fpsrm/field.hpp"
#include "fpsrm/rng.hpp"

namespace fpsrm {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Particle positions at one instant.
struct ParticleEnsemble {
  std::vector<Point> positions;

  std::size_t size() const { return positions.size(); }
  friend bool operator==(const ParticleEnsemble&, const ParticleEnsemble&) = default;
};

/// Snapshots taken every `dt` seconds; frames[0] is the initial ensemble.
struct TrajectoryFrames {
  std::vector<ParticleEnsemble> frames;
  double dt = 0.0;
  Domain domain{};

  std::size_t size() const { return frames.size(); }
  friend bool operator==(const TrajectoryFrames&, const TrajectoryFrames&) = default;
};

struct SdeConfig {
  double sigma_mc = 0.268;           ///< noise amplitude, sqrt(u)/s
  double tau = 0.03;                 ///< Euler-Maruyama step, s
  std::size_t substeps_per_frame = 1;
  std::size_t n_particles = 1000;
  std::size_t n_frames = 3000;       ///< snapshots, including the initial one
  std::uint64_t seed = 1;
  Domain domain{};

  double frame_dt() const { return tau * static_cast<double>(substeps_per_frame); }
  /// Time horizon covered by the snapshots.
  double horizon() const { return frame_dt() * static_cast<double>(n_frames - 1); }
  void validate() const;
};

/// Drift b = -grad U sampled on the potential's grid.
struct DriftField {
  ScalarField bx;
  ScalarField by;
};

DriftField drift_from_potential(const ScalarField& potential);

/// Mirrors the point about whichever boundary it violates, repeatedly, until
/// it lies in the closed domain.
Point reflect(Point p, const Domain& domain);

/// One Euler-Maruyama step X <- X + b(X) tau + sigma sqrt(tau) xi, followed
/// by reflection. Particle k draws its noise from stream k at counter `step`.
ParticleEnsemble em_step(const ParticleEnsemble& ensemble, const DriftField& drift, double sigma,
                         double tau, const CounterRng& rng, std::uint64_t step,
                         const Domain& domain);

/// Uniform initial positions, then `n_frames - 1` frames of
/// `substeps_per_frame` steps each. Deterministic in (config, potential).
TrajectoryFrames simulate(const SdeConfig& config, const ScalarField& potential);

}  // namespace fpsrm
