#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>

#include "fpsrm/binning.hpp"
#include "fpsrm/field.hpp"

namespace fpsrm {

/// Raised when a linear solve or a state update produces unusable numbers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SparseOperator = Eigen::SparseMatrix<double>;

struct FpConfig {
  double sigma_fp = 0.7;  ///< FP noise amplitude; diffusion C = sigma^2 / 2
  Grid2D grid;
  double dt = 0.03;
  std::size_t n_steps = 1;

  double diffusion() const { return 0.5 * sigma_fp * sigma_fp; }
  double horizon() const { return dt * static_cast<double>(n_steps); }
  void validate() const;
};

/// States at t_n = n dt, n = 0..n_steps, plus the time-quadrature weights
/// that go with them (trapezoidal for forward states; for adjoint states the
/// weights that make the L2 gradient exact for the discrete objective).
struct SolverTrajectory {
  std::vector<ScalarField> states;
  std::vector<double> weights;
  double dt = 0.0;

  std::size_t n_steps() const { return states.empty() ? 0 : states.size() - 1; }
  const ScalarField& final_state() const { return states.back(); }
};

/// Chang-Cooper weight delta(w) = 1/w - 1/(e^w - 1), with delta(0) = 1/2.
double cc_delta(double w);

/// Bernoulli function w / (e^w - 1) = 1 - w delta(w); B(0) = 1.
double bernoulli(double w);
double bernoulli_derivative(double w);

/// Finite-volume FP operator A with d f/dt = A f.
///
/// Across the face between cells a (lower index) and b the flux
/// C grad f + f grad U is discretized as
///   F = (C/h) [ B(w) f_b - B(-w) f_a ],   w = -(U_b - U_a) / C,
/// i.e. the Chang-Cooper face density f_a + delta(w) (f_b - f_a) with face
/// drift -(U_b - U_a)/h. Boundary faces carry no flux, so every column sums
/// to zero and exp(-U/C) is in the kernel.
SparseOperator assemble_fp_operator(const ScalarField& potential, const FpConfig& config);

/// Chang-Cooper discretization of the adjoint operator C Lap p + b . grad p,
/// b = -grad U, with homogeneous Neumann conditions. Across the face between
/// a and b the drift term is weighted (1 - delta) towards a and delta towards
/// b, so the matrix equals the transpose of assemble_fp_operator.
SparseOperator assemble_adjoint_operator(const ScalarField& potential, const FpConfig& config);

/// Discrete Gibbs state exp(-U/C), normalized to unit mass.
ScalarField gibbs_state(const ScalarField& potential, double sigma_fp);

/// Data frame used at each solver step: the most recent frame at or before
/// t_n (piecewise constant, left-continuous in time).
std::vector<const ScalarField*> data_at_steps(const FrameSequence& fd, std::size_t n_steps, double dt);

/// Forward/adjoint time stepping for one fixed potential. The step matrices
/// are factored once on construction and reused for every step.
class FpSolver {
 public:
  /// `with_adjoint` also factors the adjoint step matrices.
  FpSolver(const ScalarField& potential, FpConfig config, bool with_adjoint = true);
  ~FpSolver();
  FpSolver(FpSolver&&) noexcept;
  FpSolver& operator=(FpSolver&&) noexcept;

  const FpConfig& config() const { return config_; }
  const SparseOperator& fp_operator() const { return operator_; }
  const SparseOperator& adjoint_operator() const { return adjoint_; }
  const ScalarField& potential() const { return potential_; }

  /// Implicit Euler for the first step, BDF2 afterwards:
  ///   (3 f^{n+1} - 4 f^n + f^{n-1}) / (2 dt) = A f^{n+1}.
  SolverTrajectory solve_forward(const ScalarField& f0) const;

  /// Backward sweep of the adjoint of the forward time stepper for the
  /// tracking objective
  ///   data_weight/2 sum_n w_n |f^n - d^n|^2 + xi/2 |f^N - d^N|^2.
  /// The spatial operator is assemble_adjoint_operator. States are scaled to
  /// approximate p(x, t_n) of the continuous adjoint.
  SolverTrajectory solve_adjoint(const SolverTrajectory& forward, const FrameSequence& fd, double xi,
                                 double data_weight = 1.0) const;

 private:
  struct Factorizations;

  ScalarField potential_;
  FpConfig config_;
  SparseOperator operator_;
  SparseOperator adjoint_;
  std::unique_ptr<Factorizations> lu_;
};

SolverTrajectory solve_forward(const ScalarField& f0, const ScalarField& potential, const FpConfig& config);
SolverTrajectory solve_adjoint(const SolverTrajectory& forward, const ScalarField& potential,
                               const FrameSequence& fd, double xi, const FpConfig& config,
                               double data_weight = 1.0);

/// Discrete div(f grad p) whose face densities are the U-derivatives of the
/// Chang-Cooper fluxes, so that for every cell k
///   d/dU_k (p . A(U) f) = result[k].
/// Reduces to the arithmetic face average of f when U is constant.
ScalarField chang_cooper_divergence(const ScalarField& potential, const ScalarField& f,
                                    const ScalarField& p, double sigma_fp);

/// Smallest value across all states.
double min_value(const SolverTrajectory& trajectory);

}  // namespace fpsrm
