#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fpsrm/binning.hpp"
#include "fpsrm/field.hpp"
#include "fpsrm/fp_solver.hpp"
#include "fpsrm/inverse.hpp"

namespace fpsrm {

/// Uniform partition of the frame intervals into K windows. A frame on a
/// window boundary is the terminal frame of one window and the first frame of
/// the next; when K does not divide the interval count the last window takes
/// the remainder.
struct WindowPlan {
  std::size_t windows = 5;
  std::size_t steps_per_frame = 1;  ///< solver steps per frame interval

  /// Inclusive [first, last] frame indices of each window.
  std::vector<std::pair<std::size_t, std::size_t>> frame_ranges(std::size_t n_frames) const;
  void validate(std::size_t n_frames) const;
};

struct WindowResult {
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;
  ScalarField initial_density;
  ScalarField potential;
  ScalarField scaled;
  bool degenerate = false;  ///< potential was constant, scaled is all zeros
  NcgReport report;
};

struct Aggregate {
  ScalarField mean;
  ScalarField sd;
  bool sd_defined = true;  ///< false for a single window (sd set to zero)
  std::vector<bool> degenerate;
};

/// Min-max scales each potential, then takes the pixel-wise mean and the
/// sample standard deviation (K - 1 denominator).
Aggregate aggregate(const std::vector<ScalarField>& potentials);

struct ReconstructionResult {
  std::vector<WindowResult> windows;
  ScalarField mean;
  ScalarField sd;
  bool sd_defined = true;
  bool complete = true;  ///< false if a window failed; `windows` holds the finished ones
  std::string failure;
};

using WindowIterationCallback = std::function<void(std::size_t window, const NcgIterate&)>;

/// Solves the inverse problem window by window. Window 1 starts from the
/// first data frame; window k > 1 starts from the forward density at the end
/// of window k-1 under that window's optimal potential. Every window's NCG
/// starts at U = 0. The solver step is fd.dt / plan.steps_per_frame; `fp`
/// supplies sigma and the solver grid.
ReconstructionResult run_windows(const FrameSequence& fd, const WindowPlan& plan, const InverseConfig& inverse,
                                 const FpConfig& fp, const WindowIterationCallback& on_iteration = {});

}  // namespace fpsrm
