#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "fpsrm/inverse.hpp"
#include "fpsrm/sde.hpp"
#include "support.hpp"

using namespace fpsrm;
using namespace fpsrm::testing;

namespace {

FpConfig config_on(std::size_t n, double dt, std::size_t steps) {
  FpConfig c;
  c.grid = unit_grid(n);
  c.dt = dt;
  c.n_steps = steps;
  return c;
}

FrameSequence frames_from(const SolverTrajectory& traj, const Grid2D& grid, std::size_t stride = 1) {
  FrameSequence fd{grid, {}, traj.dt * static_cast<double>(stride)};
  for (std::size_t n = 0; n < traj.states.size(); n += stride) fd.frames.push_back(traj.states[n]);
  return fd;
}

// Dense re-implementation of the discrete objective: Chang-Cooper written in
// face-density form, dense LU for every time step, and explicit sums for
// every quadrature.
double dense_objective(const ScalarField& u, const ScalarField& f0, const FrameSequence& fd, double alpha,
                       double xi, double sigma, double dt, std::size_t steps) {
  const Grid2D& g = u.grid();
  const std::size_t nx = g.nx(), ny = g.ny(), n = g.size();
  const double c = 0.5 * sigma * sigma;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  auto face = [&](std::size_t ka, std::size_t kb, double h) {
    const double du = u[kb] - u[ka];
    const double w = -du / c;
    const double delta = std::abs(w) < 1e-6 ? 0.5 - w / 12.0 : 1.0 / w - 1.0 / (std::exp(w) - 1.0);
    // flux from a to b: -(C (f_b - f_a) + (f_a + delta (f_b - f_a)) du) / h
    const double ca = (c - (1.0 - delta) * du) / h;
    const double cb = (-c - delta * du) / h;
    a(ka, ka) -= ca / h;
    a(ka, kb) -= cb / h;
    a(kb, ka) += ca / h;
    a(kb, kb) += cb / h;
  };
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) face(j * nx + i, j * nx + i + 1, g.hx());
  for (std::size_t j = 0; j + 1 < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) face(j * nx + i, (j + 1) * nx + i, g.hy());

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> euler(id - dt * a), bdf2(3.0 * id - 2.0 * dt * a);
  std::vector<Eigen::VectorXd> f(steps + 1);
  f[0] = Eigen::Map<const Eigen::VectorXd>(f0.data().data(), n);
  f[1] = euler.solve(f[0]);
  for (std::size_t k = 1; k < steps; ++k) f[k + 1] = bdf2.solve(4.0 * f[k] - f[k - 1]);

  const double area = g.cell_area();
  double j_track = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const auto frame = static_cast<std::size_t>(std::floor(static_cast<double>(k) * dt / fd.dt + 1e-9));
    const ScalarField& d = fd.frames[std::min(frame, fd.frames.size() - 1)];
    double s = 0.0;
    for (std::size_t q = 0; q < n; ++q) s += (f[k][q] - d[q]) * (f[k][q] - d[q]) * area;
    const double w = (k == 0 || k == steps) ? 0.5 * dt : dt;
    j_track += 0.5 * w * s;
    if (k == steps) j_track += 0.5 * xi * s;
  }
  double reg = 0.0;
  for (std::size_t q = 0; q < n; ++q) reg += u[q] * u[q] * area;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) reg += std::pow((u(i + 1, j) - u(i, j)) / g.hx(), 2) * area;
  for (std::size_t j = 0; j + 1 < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) reg += std::pow((u(i, j + 1) - u(i, j)) / g.hy(), 2) * area;
  return j_track + 0.5 * alpha * reg;
}

struct Instance {
  FpConfig fp;
  ScalarField f0;
  FrameSequence fd;
};

// Data generated by a smooth "true" potential, then perturbed.
Instance smooth_instance(std::size_t n, std::size_t steps, std::size_t stride, std::uint64_t seed) {
  Instance in{config_on(n, 0.03, steps), {}, {}};
  in.f0 = ScalarField::sample(in.fp.grid, [](double x, double y) { return std::exp(-0.3 * (x * x + y * y)); });
  in.f0 *= 1.0 / integrate(in.f0);
  const auto truth = random_smooth_field(in.fp.grid, seed, 0.4);
  in.fd = frames_from(solve_forward(in.f0, truth, in.fp), in.fp.grid, stride);
  for (auto& f : in.fd.frames) f.axpy(0.002, random_field(in.fp.grid, seed + 7));
  return in;
}

}  // namespace

TEST_CASE("objective") {
  const auto fp = config_on(8, 0.05, 6);
  const ScalarField uniform(fp.grid, 1.0 / 36.0);
  FrameSequence flat{fp.grid, std::vector<ScalarField>(7, uniform), fp.dt};
  InverseConfig inv;

  CHECK(objective(ScalarField(fp.grid), uniform, flat, inv, fp) < 1e-30);

  SUBCASE("constant potential only adds the L2 regularizer") {
    inv.alpha = 0.3;
    const double c = 1.7;
    const double j = objective(ScalarField(fp.grid, c), uniform, flat, inv, fp);
    CHECK(j == doctest::Approx(0.5 * inv.alpha * c * c * 36.0).epsilon(1e-12));
  }

  SUBCASE("matches a dense re-implementation") {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto in = smooth_instance(7, 8, 2, seed);
      InverseConfig cfg;
      cfg.alpha = 0.05;
      cfg.xi = 0.7;
      const auto u = random_field(in.fp.grid, seed + 40, -0.8, 0.8);
      const ReducedObjective problem(in.f0, in.fd, cfg, in.fp);
      const auto ev = problem.evaluate(u);
      const double oracle = dense_objective(u, in.f0, in.fd, cfg.alpha, cfg.xi, in.fp.sigma_fp, in.fp.dt, in.fp.n_steps);
      CHECK(std::abs(ev.value - oracle) <= 1e-12 * std::abs(oracle));
      CHECK(ev.value == doctest::Approx(ev.tracking + ev.terminal + ev.regularization).epsilon(1e-14));
    }
  }

  SUBCASE("data must cover the window") {
    FrameSequence short_data{fp.grid, std::vector<ScalarField>(3, uniform), fp.dt};
    CHECK_THROWS_AS(ReducedObjective(uniform, short_data, inv, fp), std::invalid_argument);
  }
}

TEST_CASE("regularizer") {
  const Grid2D g = unit_grid(10);
  CHECK(regularizer(ScalarField(g, 2.0), 0.5) == doctest::Approx(0.25 * 4.0 * 36.0));
  // U = x: |grad U| = 1 on the interior faces, i.e. (nx - 1) / nx of the area
  const auto x = ScalarField::sample(g, [](double x, double) { return x; });
  double l2 = 0.0;
  for (double v : x.values()) l2 += v * v * g.cell_area();
  CHECK(regularizer(x, 2.0) == doctest::Approx(l2 + 36.0 * 0.9).epsilon(1e-12));
}

TEST_CASE("L2 gradient") {
  const auto fp = config_on(9, 0.05, 4);
  const auto fwd = solve_forward(random_density(fp.grid, 1), ScalarField(fp.grid), fp);
  SolverTrajectory zero = fwd;
  for (auto& s : zero.states) s = ScalarField(fp.grid);

  CHECK(max_abs(l2_gradient(ScalarField(fp.grid), fwd, zero, 1e-4, fp.sigma_fp)) == 0.0);
  const auto gc = l2_gradient(ScalarField(fp.grid, 3.0), fwd, zero, 0.1, fp.sigma_fp);
  for (double v : gc.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-13));

  SUBCASE("regularizer part is linear in alpha") {
    const auto u = random_field(fp.grid, 5);
    const auto p = solve_adjoint(fwd, u, frames_from(fwd, fp.grid), 1.0, fp);  // zero misfit
    SolverTrajectory adj = zero;
    for (std::size_t n = 0; n < adj.states.size(); ++n) adj.states[n] = random_field(fp.grid, 60 + n);
    const auto g1 = l2_gradient(u, fwd, adj, 0.2, fp.sigma_fp);
    const auto g2 = l2_gradient(u, fwd, adj, 0.4, fp.sigma_fp);
    ScalarField reg = u - laplacian_neumann(u);
    reg *= 0.2;
    CHECK(max_abs_diff(g2 - g1, reg) < 1e-13);
    CHECK(max_abs(p.states.front()) == 0.0);
  }

  CHECK_THROWS_AS(l2_gradient(ScalarField(fp.grid), fwd, SolverTrajectory{}, 1.0, fp.sigma_fp), std::invalid_argument);
}

TEST_CASE("gradient against central differences") {
  // 16 x 16 grid, 20 solver steps, two per frame
  const auto in = smooth_instance(16, 20, 2, 77);
  InverseConfig cfg;
  cfg.alpha = 1e-3;
  cfg.xi = 1.0;
  const ReducedObjective problem(in.f0, in.fd, cfg, in.fp);

  for (std::uint64_t seed : {3u, 4u, 5u}) {
    CAPTURE(seed);
    const auto u = random_smooth_field(in.fp.grid, seed, 0.2);
    const auto dir = random_smooth_field(in.fp.grid, seed + 1000, 1.0);
    const double eps = 1e-5;
    ScalarField up = u, um = u;
    up.axpy(eps, dir);
    um.axpy(-eps, dir);
    const double fd = (problem.value(up) - problem.value(um)) / (2.0 * eps);
    const auto grad = problem.gradient(u);
    const double adj = inner_product(grad.l2, dir);
    CHECK(std::abs(adj - fd) < 1e-3 * std::abs(fd));
    // the H1 gradient represents the same derivative in the H1 inner product
    CHECK(std::abs(problem.metric().inner(grad.h1, dir) - adj) < 1e-10 * std::max(1.0, std::abs(adj)));
  }

  SUBCASE("also with a rough potential") {
    const auto u = random_field(in.fp.grid, 9, -0.3, 0.3);
    const auto dir = random_field(in.fp.grid, 10);
    const double eps = 1e-5;
    ScalarField up = u, um = u;
    up.axpy(eps, dir);
    um.axpy(-eps, dir);
    const double fd = (problem.value(up) - problem.value(um)) / (2.0 * eps);
    const double adj = inner_product(problem.gradient(u).l2, dir);
    CHECK(std::abs(adj - fd) < 1e-3 * std::abs(fd));
  }

  SUBCASE("zero-data fixed point") {
    const auto fp = config_on(10, 0.03, 6);
    const auto f0 = random_density(fp.grid, 3);
    const auto fd = frames_from(solve_forward(f0, ScalarField(fp.grid), fp), fp.grid);
    CHECK(max_abs(compute_gradient(ScalarField(fp.grid), f0, fd, cfg, fp)) == 0.0);
  }
}

TEST_CASE("H1 metric") {
  const Grid2D g = unit_grid(14);
  const H1Metric metric(g);

  CHECK(max_abs(h1_gradient(ScalarField(g))) == 0.0);
  const auto c = h1_gradient(ScalarField(g, -2.5));
  for (double v : c.values()) CHECK(v == doctest::Approx(-2.5).epsilon(1e-12));

  const auto r = random_field(g, 1);
  const auto x = metric.riesz(r);
  CHECK(max_abs_diff(x - laplacian_neumann(x), r) < 1e-10);
  CHECK(max_abs_diff(metric.apply(x), r) < 1e-12);
  CHECK(max_abs_diff(h1_gradient(r), x) < 1e-12);

  const auto a = random_field(g, 2), b = random_field(g, 3);
  CHECK(metric.inner(metric.riesz(a), b) == doctest::Approx(inner_product(a, b)).epsilon(1e-10));
  CHECK(metric.inner(a, b) == doctest::Approx(metric.inner(b, a)).epsilon(1e-12));
  CHECK(metric.norm(a) * metric.norm(a) == doctest::Approx(metric.inner(a, a)).epsilon(1e-12));
  // ||U||_H1^2 = ||U||^2 + ||grad U||^2, the same quadratic form as the regularizer
  CHECK(0.5 * metric.inner(a, a) == doctest::Approx(regularizer(a, 1.0)).epsilon(1e-12));
}

TEST_CASE("NCG") {
  SUBCASE("zero-drift data from the solver") {
    const auto fp = config_on(12, 0.03, 10);
    const auto f0 = ScalarField::sample(fp.grid, [](double x, double y) { return std::exp(-(x * x + y * y)); });
    const auto fd = frames_from(solve_forward(f0, ScalarField(fp.grid), fp), fp.grid);
    InverseConfig cfg;
    const auto res = ncg_minimize(f0, fd, cfg, fp);
    CHECK(max_abs(res.potential) <= 1e-2);
    CHECK(res.report.converged());
  }

  SUBCASE("zero-drift particle data") {
    // Binned particles carry sampling noise, so the optimum fits a small
    // noise potential rather than exactly zero. Steepest descent and NCG
    // must agree on it.
    SdeConfig sde;
    sde.sigma_mc = 0.7;
    sde.n_particles = 20000;
    sde.n_frames = 11;
    sde.seed = 5;
    const Grid2D grid = unit_grid(12);
    const auto fd = bin_sequence(simulate(sde, ScalarField(grid)), grid);
    FpConfig fp = config_on(12, sde.tau, 10);
    InverseConfig cfg;
    cfg.tol = 1e-2;
    cfg.n_max = 400;
    const auto ncg = ncg_minimize(fd.frames[0], fd, cfg, fp);
    cfg.steepest_descent = true;
    const auto sd = ncg_minimize(fd.frames[0], fd, cfg, fp);
    CHECK(ncg.report.converged());
    CHECK(sd.report.converged());
    for (const auto& it : sd.report.iterates) CHECK(it.beta == 0.0);
    CHECK(max_abs(ncg.potential) < 0.1);
    CHECK(max_abs_diff(ncg.potential, sd.potential) < 0.1 * max_abs(ncg.potential));
    CHECK(ncg.report.iterates.size() <= sd.report.iterates.size());
  }

  SUBCASE("pure Tikhonov decreases monotonically to zero") {
    const auto fp = config_on(10, 0.03, 4);
    const ScalarField uniform(fp.grid, 1.0 / 36.0);
    FrameSequence fd{fp.grid, std::vector<ScalarField>(5, uniform), fp.dt};
    InverseConfig cfg;
    cfg.alpha = 1.0;
    cfg.xi = 0.0;
    cfg.data_weight = 0.0;
    cfg.tol = 1e-6;
    const ReducedObjective problem(uniform, fd, cfg, fp);
    const auto u0 = random_smooth_field(fp.grid, 12, 1.0);
    const auto res = ncg_minimize(problem, {}, u0);
    const auto& its = res.report.iterates;
    REQUIRE(its.size() >= 2);
    for (std::size_t k = 1; k < its.size(); ++k) CHECK(its[k].objective <= its[k - 1].objective);
    CHECK(res.report.converged());
    CHECK(max_abs(res.potential) < 1e-5 * max_abs(u0));
  }

  SUBCASE("desk-scale run") {
    const auto in = smooth_instance(16, 20, 2, 91);
    InverseConfig cfg;
    cfg.alpha = 1e-4;
    cfg.n_max = 25;
    std::vector<std::string> lines;
    const auto res = ncg_minimize(in.f0, in.fd, cfg, in.fp, [&](const NcgIterate& it) { lines.push_back(format_iteration_tsv(it)); });
    const auto& its = res.report.iterates;
    REQUIRE(its.size() >= 3);
    CHECK(lines.size() == its.size());
    CHECK(its.front().iteration == 0);
    CHECK(its.front().step == 0.0);
    for (std::size_t k = 1; k < its.size(); ++k) {
      CAPTURE(k);
      CHECK(its[k].objective <= its[k - 1].objective);
      CHECK(its[k].step > 0.0);
      if (!its[k].restarted && !cfg.steepest_descent) CHECK(its[k].dy_denominator > 0.0);
      CHECK(its[k].beta >= 0.0);
    }
    CHECK(its.back().objective < 0.5 * its.front().objective);

    std::istringstream row(lines[1]);
    std::vector<std::string> cols;
    for (std::string col; std::getline(row, col, '\t');) cols.push_back(col);
    REQUIRE(cols.size() == 5);
    CHECK(cols[0] == "1");
    CHECK(std::stod(cols[1]) == doctest::Approx(its[1].objective).epsilon(1e-6));
  }
}

TEST_CASE("status and config") {
  CHECK(to_string(NcgStatus::Converged) == "converged");
  CHECK(to_string(NcgStatus::MaxIterations) == "max_iterations");
  CHECK(to_string(NcgStatus::LineSearchFailed) == "line_search_failed");
  InverseConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.alpha = 1e-4;
  cfg.linesearch.shrink = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
