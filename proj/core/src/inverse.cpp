#include "fpsrm/inverse.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace fpsrm {

void InverseConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("InverseConfig: alpha must be positive");
  if (!(xi >= 0.0)) throw std::invalid_argument("InverseConfig: xi must be nonnegative");
  if (!(data_weight >= 0.0)) throw std::invalid_argument("InverseConfig: data_weight must be nonnegative");
  if (!(tol > 0.0)) throw std::invalid_argument("InverseConfig: tol must be positive");
  const auto& ls = linesearch;
  if (!(ls.shrink > 0.0 && ls.shrink < 1.0)) throw std::invalid_argument("InverseConfig: shrink must be in (0,1)");
  if (!(ls.c_armijo > 0.0 && ls.c_armijo < 1.0))
    throw std::invalid_argument("InverseConfig: c_armijo must be in (0,1)");
  if (!(ls.step_init > 0.0)) throw std::invalid_argument("InverseConfig: step_init must be positive");
  if (!(ls.max_growth >= 1.0)) throw std::invalid_argument("InverseConfig: max_growth must be >= 1");
}

// ---------------------------------------------------------------------------
// H1 metric

struct H1Metric::Impl {
  SparseOperator matrix;
  Eigen::SimplicialLDLT<SparseOperator> ldlt;
};

H1Metric::H1Metric(const Grid2D& grid) : grid_(grid), impl_(std::make_unique<Impl>()) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(5 * grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) t.emplace_back(k, k, 1.0);
  auto couple = [&](std::size_t a, std::size_t b, double h) {
    const double w = 1.0 / (h * h);
    t.emplace_back(a, a, w);
    t.emplace_back(b, b, w);
    t.emplace_back(a, b, -w);
    t.emplace_back(b, a, -w);
  };
  for (std::size_t j = 0; j < grid.ny(); ++j)
    for (std::size_t i = 0; i + 1 < grid.nx(); ++i) couple(grid.index(i, j), grid.index(i + 1, j), grid.hx());
  for (std::size_t j = 0; j + 1 < grid.ny(); ++j)
    for (std::size_t i = 0; i < grid.nx(); ++i) couple(grid.index(i, j), grid.index(i, j + 1), grid.hy());
  const auto n = static_cast<Eigen::Index>(grid.size());
  impl_->matrix.resize(n, n);
  impl_->matrix.setFromTriplets(t.begin(), t.end());
  impl_->ldlt.compute(impl_->matrix);
  if (impl_->ldlt.info() != Eigen::Success) throw NumericalError("H1Metric: factorization of I - Lap failed");
}

H1Metric::~H1Metric() = default;
H1Metric::H1Metric(H1Metric&&) noexcept = default;
H1Metric& H1Metric::operator=(H1Metric&&) noexcept = default;

ScalarField H1Metric::riesz(const ScalarField& rhs) const {
  if (!(rhs.grid() == grid_)) throw std::invalid_argument("H1Metric::riesz: grid mismatch");
  Eigen::Map<const Eigen::VectorXd> b(rhs.data().data(), static_cast<Eigen::Index>(rhs.size()));
  Eigen::VectorXd x = impl_->ldlt.solve(b);
  if (impl_->ldlt.info() != Eigen::Success || !x.allFinite()) throw NumericalError("H1Metric::riesz: solve failed");
  return ScalarField(grid_, std::vector<double>(x.data(), x.data() + x.size()));
}

ScalarField H1Metric::apply(const ScalarField& x) const {
  ScalarField out = x;
  out -= laplacian_neumann(x);
  return out;
}

double H1Metric::inner(const ScalarField& a, const ScalarField& b) const { return inner_product(a, apply(b)); }

double H1Metric::norm(const ScalarField& a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

ScalarField h1_gradient(const ScalarField& g_l2) { return H1Metric(g_l2.grid()).riesz(g_l2); }

// ---------------------------------------------------------------------------
// Objective and gradient

double regularizer(const ScalarField& potential, double alpha) {
  const Grid2D& g = potential.grid();
  double sq = 0.0;
  for (double v : potential.values()) sq += v * v;
  double grad_sq = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (i + 1 < g.nx()) {
        const double d = (potential(i + 1, j) - potential(i, j)) / g.hx();
        grad_sq += d * d;
      }
      if (j + 1 < g.ny()) {
        const double d = (potential(i, j + 1) - potential(i, j)) / g.hy();
        grad_sq += d * d;
      }
    }
  }
  return 0.5 * alpha * (sq + grad_sq) * g.cell_area();
}

ScalarField l2_gradient(const ScalarField& potential, const SolverTrajectory& forward,
                        const SolverTrajectory& adjoint, double alpha, double sigma_fp) {
  if (forward.states.size() != adjoint.states.size() || adjoint.weights.size() != adjoint.states.size())
    throw std::invalid_argument("l2_gradient: forward and adjoint trajectories are not aligned");
  ScalarField g = potential;
  g -= laplacian_neumann(potential);
  g *= alpha;
  for (std::size_t n = 0; n < adjoint.states.size(); ++n) {
    const double w = adjoint.weights[n];
    if (w == 0.0) continue;
    g.axpy(-w, chang_cooper_divergence(potential, forward.states[n], adjoint.states[n], sigma_fp));
  }
  return g;
}

namespace {
double squared_distance(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s * a.grid().cell_area();
}
}  // namespace

ReducedObjective::ReducedObjective(ScalarField f0, FrameSequence fd, InverseConfig inverse, FpConfig fp)
    : f0_(std::move(f0)),
      fd_(std::move(fd)),
      inverse_(inverse),
      fp_(std::move(fp)),
      metric_(fp_.grid) {
  inverse_.validate();
  fp_.validate();
  if (!(f0_.grid() == fp_.grid)) f0_ = inject(f0_, fp_.grid);
  if (!(fd_.grid == fp_.grid)) fd_ = fd_.injected(fp_.grid);
  if (fd_.frames.empty()) throw std::invalid_argument("ReducedObjective: no data frames");
  if (fd_.horizon() + 1e-9 * fp_.horizon() < fp_.horizon())
    throw std::invalid_argument("ReducedObjective: data does not cover the solver time window");
  data_ = data_at_steps(fd_, fp_.n_steps, fp_.dt);
}

ReducedObjective::Evaluation ReducedObjective::evaluate(const ScalarField& potential) const {
  FpSolver solver(potential, fp_, false);
  Evaluation e;
  e.forward = solver.solve_forward(f0_);
  const std::size_t n_steps = fp_.n_steps;
  double tracking = 0.0;
  for (std::size_t n = 0; n <= n_steps; ++n)
    tracking += e.forward.weights[n] * squared_distance(e.forward.states[n], *data_[n]);
  e.tracking = 0.5 * inverse_.data_weight * tracking;
  e.terminal = 0.5 * inverse_.xi * squared_distance(e.forward.states[n_steps], *data_[n_steps]);
  e.regularization = regularizer(potential, inverse_.alpha);
  e.value = e.tracking + e.terminal + e.regularization;
  return e;
}

ReducedObjective::Gradient ReducedObjective::gradient(const ScalarField& potential, const Evaluation& at) const {
  FpSolver solver(potential, fp_);
  const SolverTrajectory adjoint = solver.solve_adjoint(at.forward, fd_, inverse_.xi, inverse_.data_weight);
  Gradient g;
  g.l2 = l2_gradient(potential, at.forward, adjoint, inverse_.alpha, fp_.sigma_fp);
  g.h1 = metric_.riesz(g.l2);
  return g;
}

double objective(const ScalarField& potential, const ScalarField& f0, const FrameSequence& fd,
                 const InverseConfig& inverse, const FpConfig& fp) {
  return ReducedObjective(f0, fd, inverse, fp).value(potential);
}

ScalarField compute_gradient(const ScalarField& potential, const ScalarField& f0, const FrameSequence& fd,
                             const InverseConfig& inverse, const FpConfig& fp) {
  return ReducedObjective(f0, fd, inverse, fp).gradient(potential).h1;
}

// ---------------------------------------------------------------------------
// Nonlinear conjugate gradient

std::string to_string(NcgStatus status) {
  switch (status) {
    case NcgStatus::Converged: return "converged";
    case NcgStatus::MaxIterations: return "max_iterations";
    case NcgStatus::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

std::string format_iteration_tsv(const NcgIterate& it) {
  std::ostringstream os;
  os.precision(12);
  os << it.iteration << '\t' << it.objective << '\t' << it.gradient_norm << '\t' << it.step << '\t'
     << it.backtracks;
  return os.str();
}

namespace {

struct LineSearchOutcome {
  bool accepted = false;
  double step = 0.0;
  std::size_t backtracks = 0;
  ScalarField point;
  ReducedObjective::Evaluation evaluation;
};

LineSearchOutcome armijo(const ReducedObjective& problem, const ScalarField& u, double value,
                         const ScalarField& direction, double slope, double initial_step) {
  const LineSearchConfig& ls = problem.config().linesearch;
  auto try_step = [&](double step, ScalarField& trial, ReducedObjective::Evaluation& e) {
    trial = u;
    trial.axpy(step, direction);
    try {
      e = problem.evaluate(trial);
    } catch (const NumericalError&) {
      return false;  // overshoot into an unusable potential; shrink like a failed decrease
    }
    return std::isfinite(e.value) && e.value <= value + ls.c_armijo * step * slope;
  };

  LineSearchOutcome out;
  double step = initial_step;
  for (std::size_t bt = 0; bt <= ls.max_backtracks; ++bt) {
    ScalarField trial;
    ReducedObjective::Evaluation e;
    if (try_step(step, trial, e)) {
      out.accepted = true;
      out.step = step;
      out.backtracks = bt;
      out.point = std::move(trial);
      out.evaluation = std::move(e);
      break;
    }
    step *= ls.shrink;
  }
  if (!out.accepted) {
    out.backtracks = ls.max_backtracks;
    return out;
  }

  if (ls.extrapolate && out.backtracks == 0) {
    // quadratic model q(s) = J + slope s + c s^2 through the accepted point
    const double s = out.step;
    const double curv = (out.evaluation.value - value - slope * s) / (s * s);
    const double cap = ls.max_growth * s;
    const double s_star = curv > 0.0 ? std::min(-slope / (2.0 * curv), cap) : cap;
    if (s_star > 2.0 * s) {
      ScalarField trial;
      ReducedObjective::Evaluation e;
      if (try_step(s_star, trial, e) && e.value < out.evaluation.value) {
        out.step = s_star;
        out.point = std::move(trial);
        out.evaluation = std::move(e);
      }
    }
  }
  return out;
}

}  // namespace

NcgResult ncg_minimize(const ReducedObjective& problem, const IterationCallback& on_iteration,
                       const std::optional<ScalarField>& initial) {
  const InverseConfig& cfg = problem.config();
  const H1Metric& metric = problem.metric();

  ScalarField u = initial ? *initial : ScalarField(problem.fp_config().grid, 0.0);
  ReducedObjective::Evaluation eval = problem.evaluate(u);
  ScalarField g = problem.gradient(u, eval).h1;
  double g_norm2 = metric.inner(g, g);

  NcgResult result;
  NcgReport& report = result.report;
  report.tolerance = cfg.tol_relative ? cfg.tol * std::sqrt(g_norm2) : cfg.tol;

  auto emit = [&](const NcgIterate& it) {
    report.iterates.push_back(it);
    if (on_iteration) on_iteration(it);
  };
  emit({0, eval.value, std::sqrt(g_norm2), 0.0, 0, 0.0, 0.0, false});

  ScalarField d = g;
  d *= -1.0;
  std::size_t n = 0;
  double prev_step = 0.0, prev_slope = 0.0;
  report.status = NcgStatus::MaxIterations;
  while (true) {
    if (std::sqrt(g_norm2) <= report.tolerance) {
      report.status = NcgStatus::Converged;
      break;
    }
    if (n >= cfg.n_max) break;

    bool restarted = false;
    double slope = metric.inner(g, d);
    if (!(slope < 0.0)) {
      d = g;
      d *= -1.0;
      slope = -g_norm2;
      restarted = true;
    }
    double initial_step = cfg.linesearch.step_init;
    if (cfg.linesearch.scale_initial_step && prev_step > 0.0) initial_step = prev_step * prev_slope / slope;
    LineSearchOutcome ls = armijo(problem, u, eval.value, d, slope, initial_step);
    if (!ls.accepted && !restarted) {
      d = g;
      d *= -1.0;
      slope = -g_norm2;
      restarted = true;
      ls = armijo(problem, u, eval.value, d, slope, cfg.linesearch.step_init);
    }
    if (!ls.accepted) {
      report.status = NcgStatus::LineSearchFailed;
      std::ostringstream os;
      os << "no sufficient decrease along -g after " << cfg.linesearch.max_backtracks
         << " backtracks at iteration " << n << " (J = " << eval.value << ", |g|_H1 = " << std::sqrt(g_norm2)
         << ")";
      report.diagnostic = os.str();
      break;
    }

    prev_step = ls.step;
    prev_slope = slope;
    u = std::move(ls.point);
    eval = std::move(ls.evaluation);
    ScalarField g_new = problem.gradient(u, eval).h1;
    const double g_new_norm2 = metric.inner(g_new, g_new);

    ScalarField y = g_new;
    y -= g;
    const double denom = metric.inner(d, y);
    double beta = denom > 0.0 ? g_new_norm2 / denom : 0.0;
    if (cfg.steepest_descent) beta = 0.0;
    beta = std::max(beta, 0.0);

    ScalarField d_new = g_new;
    d_new *= -1.0;
    d_new.axpy(beta, d);
    d = std::move(d_new);
    g = std::move(g_new);
    g_norm2 = g_new_norm2;
    ++n;
    emit({n, eval.value, std::sqrt(g_norm2), ls.step, ls.backtracks, beta, denom, restarted});
  }

  result.potential = std::move(u);
  result.final_density = eval.forward.final_state();
  return result;
}

NcgResult ncg_minimize(const ScalarField& f0, const FrameSequence& fd, const InverseConfig& inverse,
                       const FpConfig& fp, const IterationCallback& on_iteration) {
  return ncg_minimize(ReducedObjective(f0, fd, inverse, fp), on_iteration);
}

}  // namespace fpsrm
