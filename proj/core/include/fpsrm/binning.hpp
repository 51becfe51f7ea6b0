#pragma once

#include <cstddef>
#include <vector>

#include "fpsrm/field.hpp"
#include "fpsrm/sde.hpp"

namespace fpsrm {

/// Time-ordered empirical densities f_d(., t_l) with t_l = l * dt.
struct FrameSequence {
  Grid2D grid;
  std::vector<ScalarField> frames;
  double dt = 0.0;

  std::size_t size() const { return frames.size(); }
  double horizon() const { return dt * static_cast<double>(frames.empty() ? 0 : frames.size() - 1); }

  /// Frames [first, last], inclusive, re-based so that `first` is t = 0.
  FrameSequence slice(std::size_t first, std::size_t last) const;

  /// Every frame moved onto `target` by piecewise-constant injection.
  FrameSequence injected(const Grid2D& target) const;
};

/// Normalized histogram: count / (N_p hx hy). A particle on an interior bin
/// edge goes to the higher-index bin; the outer edge belongs to the last bin.
ScalarField bin_frame(const ParticleEnsemble& ensemble, const Grid2D& grid);

FrameSequence bin_sequence(const TrajectoryFrames& frames, const Grid2D& grid);

}  // namespace fpsrm
