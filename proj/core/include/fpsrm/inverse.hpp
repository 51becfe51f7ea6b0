#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpsrm/binning.hpp"
#include "fpsrm/field.hpp"
#include "fpsrm/fp_solver.hpp"

namespace fpsrm {

struct LineSearchConfig {
  double c_armijo = 1e-4;
  double shrink = 0.5;
  double step_init = 1.0;
  std::size_t max_backtracks = 30;
  /// After the first iteration, start from the previous accepted step scaled
  /// by the ratio of directional derivatives instead of step_init.
  bool scale_initial_step = true;
  /// When the first trial is accepted, try once more at the minimizer of the
  /// quadratic through J(0), J'(0) and J(step), capped at max_growth * step.
  bool extrapolate = true;
  double max_growth = 100.0;
};

struct InverseConfig {
  double alpha = 1e-4;        ///< Tikhonov (H1) weight
  double xi = 1.0;            ///< terminal misfit weight
  double data_weight = 1.0;   ///< weight of the space-time tracking term
  /// Stop when ||g||_H1 <= tol, or <= tol * ||g^0||_H1 if tol_relative.
  double tol = 1e-4;
  bool tol_relative = true;
  std::size_t n_max = 100;
  LineSearchConfig linesearch{};
  /// Force beta = 0 (steepest descent with line search).
  bool steepest_descent = false;

  void validate() const;
};

/// (I - Lap_N) on a grid, factored once. Provides the H1 Riesz map and the
/// H1 inner product (a, b)_H1 = (a, (I - Lap_N) b)_L2.
class H1Metric {
 public:
  explicit H1Metric(const Grid2D& grid);
  ~H1Metric();
  H1Metric(H1Metric&&) noexcept;
  H1Metric& operator=(H1Metric&&) noexcept;

  const Grid2D& grid() const { return grid_; }
  /// Solves (I - Lap_N) x = rhs.
  ScalarField riesz(const ScalarField& rhs) const;
  ScalarField apply(const ScalarField& x) const;
  double inner(const ScalarField& a, const ScalarField& b) const;
  double norm(const ScalarField& a) const;

 private:
  struct Impl;
  Grid2D grid_;
  std::unique_ptr<Impl> impl_;
};

/// Solves (I - Lap_N) g_h1 = g_l2 with homogeneous Neumann conditions.
ScalarField h1_gradient(const ScalarField& g_l2);

/// alpha/2 (||U||^2 + ||grad U||^2) with face differences for grad U.
double regularizer(const ScalarField& potential, double alpha);

/// Pointwise alpha U - alpha Lap_N U - sum_n w_n div(f^n grad p^n), the
/// divergence taken with Chang-Cooper face densities and w_n the adjoint
/// trajectory's quadrature weights.
ScalarField l2_gradient(const ScalarField& potential, const SolverTrajectory& forward,
                        const SolverTrajectory& adjoint, double alpha, double sigma_fp);

/// Reduced objective J(U) = J(S(U), U) for one time window. Owns the
/// initial density, data (injected onto the solver grid) and the H1 metric.
class ReducedObjective {
 public:
  struct Evaluation {
    double value = 0.0;
    double tracking = 0.0;  ///< space-time bestfit part
    double terminal = 0.0;  ///< xi-weighted final-time part
    double regularization = 0.0;
    SolverTrajectory forward;
  };

  struct Gradient {
    ScalarField l2;
    ScalarField h1;
  };

  ReducedObjective(ScalarField f0, FrameSequence fd, InverseConfig inverse, FpConfig fp);

  const FpConfig& fp_config() const { return fp_; }
  const InverseConfig& config() const { return inverse_; }
  const H1Metric& metric() const { return metric_; }
  const ScalarField& initial_density() const { return f0_; }
  const FrameSequence& data() const { return fd_; }

  Evaluation evaluate(const ScalarField& potential) const;
  double value(const ScalarField& potential) const { return evaluate(potential).value; }
  /// Gradient at `potential`, reusing the forward trajectory of `at`.
  Gradient gradient(const ScalarField& potential, const Evaluation& at) const;
  Gradient gradient(const ScalarField& potential) const { return gradient(potential, evaluate(potential)); }

 private:
  ScalarField f0_;
  FrameSequence fd_;
  InverseConfig inverse_;
  FpConfig fp_;
  H1Metric metric_;
  std::vector<const ScalarField*> data_;
};

double objective(const ScalarField& potential, const ScalarField& f0, const FrameSequence& fd,
                 const InverseConfig& inverse, const FpConfig& fp);

/// Forward solve, adjoint solve, L2 gradient, H1 smoothing.
ScalarField compute_gradient(const ScalarField& potential, const ScalarField& f0, const FrameSequence& fd,
                             const InverseConfig& inverse, const FpConfig& fp);

enum class NcgStatus { Converged, MaxIterations, LineSearchFailed };

std::string to_string(NcgStatus status);

struct NcgIterate {
  std::size_t iteration = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;  ///< H1 norm
  double step = 0.0;           ///< accepted step length (0 for the initial point)
  std::size_t backtracks = 0;
  double beta = 0.0;
  double dy_denominator = 0.0;  ///< (d^{n-1}, g^n - g^{n-1})_H1
  bool restarted = false;       ///< direction reset to -g
};

struct NcgReport {
  std::vector<NcgIterate> iterates;
  NcgStatus status = NcgStatus::MaxIterations;
  double tolerance = 0.0;  ///< absolute H1 tolerance actually used
  std::string diagnostic;

  bool converged() const { return status == NcgStatus::Converged; }
};

struct NcgResult {
  ScalarField potential;
  ScalarField final_density;  ///< forward state at the window end under `potential`
  NcgReport report;
};

/// Tab-separated: iteration, J, ||g||_H1, step, backtracks.
std::string format_iteration_tsv(const NcgIterate& it);

using IterationCallback = std::function<void(const NcgIterate&)>;

/// Nonlinear CG with the Dai-Yuan beta (clamped at 0) in the H1 inner
/// product and Armijo backtracking. Starts from U = 0 unless `initial` is
/// given.
NcgResult ncg_minimize(const ReducedObjective& problem, const IterationCallback& on_iteration = {},
                       const std::optional<ScalarField>& initial = std::nullopt);

NcgResult ncg_minimize(const ScalarField& f0, const FrameSequence& fd, const InverseConfig& inverse,
                       const FpConfig& fp, const IterationCallback& on_iteration = {});

}  // namespace fpsrm
