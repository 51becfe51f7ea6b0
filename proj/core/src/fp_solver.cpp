#include "fpsrm/fp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

namespace fpsrm {

void FpConfig::validate() const {
  if (!(sigma_fp > 0.0)) throw std::invalid_argument("FpConfig: sigma_fp must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("FpConfig: dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("FpConfig: need at least one time step");
  if (grid.size() == 0) throw std::invalid_argument("FpConfig: grid not set");
}

double cc_delta(double w) {
  if (std::abs(w) < 1e-4) return 0.5 - w / 12.0 + w * w * w / 720.0;
  return 1.0 / w - 1.0 / std::expm1(w);
}

double bernoulli(double w) {
  if (std::abs(w) < 1e-4) return 1.0 - 0.5 * w + w * w / 12.0;
  return w / std::expm1(w);
}

double bernoulli_derivative(double w) {
  if (std::abs(w) < 1e-3) return -0.5 + w / 6.0 - w * w * w / 180.0;
  // B'(w) = 1/(e^w - 1) - w e^w / (e^w - 1)^2, with e^w/(e^w - 1) = -1/expm1(-w).
  const double em = std::expm1(w);
  return 1.0 / em + w / (em * std::expm1(-w));
}

namespace {

struct Face {
  std::size_t a;  // lower cell
  std::size_t b;  // upper cell
  double h;       // spacing along the face normal
};

template <typename Fn>
void for_each_face(const Grid2D& g, Fn&& fn) {
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i + 1 < g.nx(); ++i) fn(Face{g.index(i, j), g.index(i + 1, j), g.hx()});
  for (std::size_t j = 0; j + 1 < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nx(); ++i) fn(Face{g.index(i, j), g.index(i, j + 1), g.hy()});
}

void require_grid(const ScalarField& f, const Grid2D& g, const char* what) {
  if (!(f.grid() == g)) throw std::invalid_argument(std::string(what) + ": field is not on the solver grid");
}

Eigen::Map<const Eigen::VectorXd> as_vector(const ScalarField& f) {
  return {f.data().data(), static_cast<Eigen::Index>(f.size())};
}

ScalarField from_vector(const Grid2D& g, const Eigen::VectorXd& v) {
  return ScalarField(g, std::vector<double>(v.data(), v.data() + v.size()));
}

SparseOperator shifted(const SparseOperator& a, double diag, double scale) {
  SparseOperator id(a.rows(), a.cols());
  id.setIdentity();
  return SparseOperator(diag * id - scale * a);
}

std::vector<double> trapezoid_weights(std::size_t n_steps, double dt) {
  std::vector<double> w(n_steps + 1, dt);
  w.front() = 0.5 * dt;
  w.back() = 0.5 * dt;
  return w;
}

}  // namespace

SparseOperator assemble_fp_operator(const ScalarField& potential, const FpConfig& config) {
  const Grid2D& g = config.grid;
  require_grid(potential, g, "assemble_fp_operator");
  const double c = config.diffusion();
  if (!(c > 0.0)) throw std::invalid_argument("assemble_fp_operator: diffusion coefficient must be positive");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(5 * g.size());
  for_each_face(g, [&](const Face& face) {
    const double w = -(potential[face.b] - potential[face.a]) / c;
    const double k = c / (face.h * face.h);
    const double up = k * bernoulli(w);     // coefficient of f_b in the face flux
    const double down = k * bernoulli(-w);  // coefficient of f_a
    triplets.emplace_back(face.a, face.b, up);
    triplets.emplace_back(face.a, face.a, -down);
    triplets.emplace_back(face.b, face.b, -up);
    triplets.emplace_back(face.b, face.a, down);
  });
  const auto n = static_cast<Eigen::Index>(g.size());
  SparseOperator a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

SparseOperator assemble_adjoint_operator(const ScalarField& potential, const FpConfig& config) {
  const Grid2D& g = config.grid;
  require_grid(potential, g, "assemble_adjoint_operator");
  const double c = config.diffusion();
  if (!(c > 0.0)) throw std::invalid_argument("assemble_adjoint_operator: diffusion coefficient must be positive");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(5 * g.size());
  for_each_face(g, [&](const Face& face) {
    const double drift = -(potential[face.b] - potential[face.a]) / face.h;
    const double delta = cc_delta(drift * face.h / c);
    const double diff = c / (face.h * face.h);
    // cell a sees (p_b - p_a), cell b sees (p_a - p_b)
    const double at_a = diff + drift * (1.0 - delta) / face.h;
    const double at_b = diff - drift * delta / face.h;
    triplets.emplace_back(face.a, face.b, at_a);
    triplets.emplace_back(face.a, face.a, -at_a);
    triplets.emplace_back(face.b, face.a, at_b);
    triplets.emplace_back(face.b, face.b, -at_b);
  });
  const auto n = static_cast<Eigen::Index>(g.size());
  SparseOperator a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

ScalarField gibbs_state(const ScalarField& potential, double sigma_fp) {
  const double c = 0.5 * sigma_fp * sigma_fp;
  const double shift = potential.min();
  ScalarField g(potential.grid());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::exp(-(potential[k] - shift) / c);
  g *= 1.0 / integrate(g);
  return g;
}

std::vector<const ScalarField*> data_at_steps(const FrameSequence& fd, std::size_t n_steps, double dt) {
  if (fd.frames.empty()) throw std::invalid_argument("data_at_steps: no data frames");
  std::vector<const ScalarField*> out(n_steps + 1);
  const double frame_dt = fd.dt > 0.0 ? fd.dt : dt;
  for (std::size_t n = 0; n <= n_steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    auto l = static_cast<std::size_t>(std::floor(t / frame_dt + 1e-9));
    out[n] = &fd.frames[std::min(l, fd.frames.size() - 1)];
  }
  return out;
}

struct FpSolver::Factorizations {
  using Lu = Eigen::SparseLU<SparseOperator, Eigen::COLAMDOrdering<int>>;
  Lu euler;  // I - dt A
  Lu bdf2;   // 3 I - 2 dt A
  Lu adjoint_euler;
  Lu adjoint_bdf2;
  bool has_adjoint = false;
};

FpSolver::FpSolver(const ScalarField& potential, FpConfig config, bool with_adjoint)
    : potential_(potential), config_(std::move(config)) {
  config_.validate();
  if (!potential_.all_finite()) throw NumericalError("FpSolver: non-finite potential");
  operator_ = assemble_fp_operator(potential_, config_);
  lu_ = std::make_unique<Factorizations>();
  auto factor = [](Factorizations::Lu& lu, const SparseOperator& m, const char* name) {
    lu.analyzePattern(m);
    lu.factorize(m);
    if (lu.info() != Eigen::Success)
      throw NumericalError(std::string("FpSolver: factorization of the ") + name + " matrix failed: " +
                           lu.lastErrorMessage());
  };
  factor(lu_->euler, shifted(operator_, 1.0, config_.dt), "implicit Euler");
  factor(lu_->bdf2, shifted(operator_, 3.0, 2.0 * config_.dt), "BDF2");
  if (with_adjoint) {
    adjoint_ = assemble_adjoint_operator(potential_, config_);
    // The adjoint of the step matrix (s I - k A) is (s I - k A_adj).
    factor(lu_->adjoint_euler, shifted(adjoint_, 1.0, config_.dt), "adjoint implicit Euler");
    factor(lu_->adjoint_bdf2, shifted(adjoint_, 3.0, 2.0 * config_.dt), "adjoint BDF2");
    lu_->has_adjoint = true;
  }
}

FpSolver::~FpSolver() = default;
FpSolver::FpSolver(FpSolver&&) noexcept = default;
FpSolver& FpSolver::operator=(FpSolver&&) noexcept = default;

SolverTrajectory FpSolver::solve_forward(const ScalarField& f0) const {
  const Grid2D& g = config_.grid;
  require_grid(f0, g, "solve_forward");
  const std::size_t n_steps = config_.n_steps;

  SolverTrajectory out;
  out.dt = config_.dt;
  out.weights = trapezoid_weights(n_steps, config_.dt);
  out.states.reserve(n_steps + 1);
  out.states.push_back(f0);

  Eigen::VectorXd prev = as_vector(f0);
  Eigen::VectorXd curr = lu_->euler.solve(prev);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    if (n > 1) {
      Eigen::VectorXd next = lu_->bdf2.solve(4.0 * curr - prev);
      prev.swap(curr);
      curr.swap(next);
    }
    if (!curr.allFinite()) throw NumericalError("solve_forward: non-finite state at step " + std::to_string(n));
    out.states.push_back(from_vector(g, curr));
  }
  return out;
}

SolverTrajectory FpSolver::solve_adjoint(const SolverTrajectory& forward, const FrameSequence& fd,
                                         double xi, double data_weight) const {
  const Grid2D& g = config_.grid;
  const std::size_t n_steps = config_.n_steps;
  if (forward.n_steps() != n_steps || forward.weights.size() != n_steps + 1)
    throw std::invalid_argument("solve_adjoint: forward trajectory does not match the solver configuration");
  if (!(fd.grid == g)) throw std::invalid_argument("solve_adjoint: data is not on the solver grid");
  if (!lu_->has_adjoint) throw std::logic_error("solve_adjoint: solver was built without adjoint factorizations");
  const auto data = data_at_steps(fd, n_steps, config_.dt);

  auto misfit = [&](std::size_t n) {
    Eigen::VectorXd r = as_vector(forward.states[n]) - as_vector(*data[n]);
    double w = data_weight * forward.weights[n];
    if (n == n_steps) w += xi;
    return Eigen::VectorXd(w * r);
  };

  // Multipliers of the step equations R^1 = (I - dt A) f^1 - f^0 and
  // R^n = (3I - 2 dt A) f^n - 4 f^{n-1} + f^{n-2}, swept from n = N down.
  const auto size = static_cast<Eigen::Index>(g.size());
  std::vector<Eigen::VectorXd> lambda(n_steps + 3, Eigen::VectorXd::Zero(size));
  for (std::size_t n = n_steps; n >= 1; --n) {
    Eigen::VectorXd rhs = misfit(n) + 4.0 * lambda[n + 1] - lambda[n + 2];
    lambda[n] = (n >= 2) ? Eigen::VectorXd(lu_->adjoint_bdf2.solve(rhs))
                         : Eigen::VectorXd(lu_->adjoint_euler.solve(rhs));
    if (!lambda[n].allFinite()) throw NumericalError("solve_adjoint: non-finite state at step " + std::to_string(n));
  }

  // p^n = -2 lambda^n carries weight dt in the gradient; the implicit Euler
  // row absorbs the BDF2 history and is rescaled to keep p^1 comparable.
  SolverTrajectory out;
  out.dt = config_.dt;
  out.states.resize(n_steps + 1);
  out.weights.assign(n_steps + 1, config_.dt);
  for (std::size_t n = 2; n <= n_steps; ++n) out.states[n] = from_vector(g, -2.0 * lambda[n]);
  out.states[1] = from_vector(g, (-2.0 / 3.0) * lambda[1]);
  out.weights[1] = 1.5 * config_.dt;
  out.states[0] = out.states[1];
  out.weights[0] = 0.0;
  return out;
}

SolverTrajectory solve_forward(const ScalarField& f0, const ScalarField& potential, const FpConfig& config) {
  return FpSolver(potential, config, false).solve_forward(f0);
}

SolverTrajectory solve_adjoint(const SolverTrajectory& forward, const ScalarField& potential,
                               const FrameSequence& fd, double xi, const FpConfig& config,
                               double data_weight) {
  return FpSolver(potential, config).solve_adjoint(forward, fd, xi, data_weight);
}

ScalarField chang_cooper_divergence(const ScalarField& potential, const ScalarField& f,
                                    const ScalarField& p, double sigma_fp) {
  const Grid2D& g = potential.grid();
  require_grid(f, g, "chang_cooper_divergence");
  require_grid(p, g, "chang_cooper_divergence");
  const double c = 0.5 * sigma_fp * sigma_fp;
  ScalarField out(g);
  for_each_face(g, [&](const Face& face) {
    const double w = -(potential[face.b] - potential[face.a]) / c;
    const double face_density = -(bernoulli_derivative(w) * f[face.b] + bernoulli_derivative(-w) * f[face.a]);
    const double flux = face_density * (p[face.b] - p[face.a]) / (face.h * face.h);
    out[face.a] += flux;
    out[face.b] -= flux;
  });
  return out;
}

double min_value(const SolverTrajectory& trajectory) {
  double lo = std::numeric_limits<double>::infinity();
  for (const ScalarField& s : trajectory.states) lo = std::min(lo, s.min());
  return lo;
}

}  // namespace fpsrm
