#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "fpsrm/sde.hpp"
#include "fpsrm/windowed.hpp"
#include "support.hpp"

using namespace fpsrm;
using namespace fpsrm::testing;

namespace {

double mean_of(const ScalarField& f) {
  return std::accumulate(f.values().begin(), f.values().end(), 0.0) / static_cast<double>(f.size());
}

FrameSequence particle_data(const ScalarField& truth, std::size_t n_particles, std::size_t n_frames, std::size_t bins,
                            std::uint64_t seed) {
  SdeConfig sde;
  sde.sigma_mc = 0.7;
  sde.n_particles = n_particles;
  sde.n_frames = n_frames;
  sde.seed = seed;
  return bin_sequence(simulate(sde, truth), unit_grid(bins));
}

FpConfig solver_on(std::size_t n) {
  FpConfig fp;
  fp.grid = unit_grid(n);
  return fp;
}

}  // namespace

TEST_CASE("window plan") {
  WindowPlan plan{3, 1};
  const auto r = plan.frame_ranges(11);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(r[1] == std::pair<std::size_t, std::size_t>{3, 6});
  CHECK(r[2] == std::pair<std::size_t, std::size_t>{6, 10});  // remainder goes last

  plan.windows = 5;
  const auto even = plan.frame_ranges(3001);
  CHECK(even.front() == std::pair<std::size_t, std::size_t>{0, 600});
  CHECK(even.back() == std::pair<std::size_t, std::size_t>{2400, 3000});

  plan.windows = 1;
  CHECK(plan.frame_ranges(7).front() == std::pair<std::size_t, std::size_t>{0, 6});

  plan.windows = 7;
  CHECK_THROWS_AS(plan.frame_ranges(7), std::invalid_argument);
  plan.windows = 0;
  CHECK_THROWS_AS(plan.validate(7), std::invalid_argument);
}

TEST_CASE("aggregate") {
  const Grid2D g(Domain{}, 2, 2);

  SUBCASE("two-point statistics") {
    // after scaling, pixel 0 is 0 in one window and 1 in the other
    const ScalarField a(g, std::vector<double>{0, 1, 0, 1}), b(g, std::vector<double>{1, 0, 1, 0});
    const auto agg = aggregate({a, b});
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(agg.mean[k] == doctest::Approx(0.5));
      CHECK(agg.sd[k] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    }
    CHECK(agg.sd_defined);
  }

  SUBCASE("identical windows") {
    const auto u = random_field(unit_grid(6), 3);
    const auto agg = aggregate({u, 2.0 * u, u});
    CHECK(max_abs(agg.sd) < 1e-15);
    CHECK(max_abs_diff(agg.mean, min_max_scale(u).field) < 1e-15);
  }

  SUBCASE("single window") {
    const auto u = random_field(unit_grid(6), 4);
    const auto agg = aggregate({u});
    CHECK_FALSE(agg.sd_defined);
    CHECK(max_abs(agg.sd) == 0.0);
    CHECK(agg.mean == min_max_scale(u).field);
  }

  SUBCASE("degenerate windows are flagged") {
    const auto agg = aggregate({ScalarField(g, 3.0), random_field(g, 1)});
    CHECK(agg.degenerate == std::vector<bool>{true, false});
  }

  SUBCASE("permutation invariant") {
    std::vector<ScalarField> us;
    for (std::uint64_t s = 0; s < 5; ++s) us.push_back(random_field(unit_grid(7), s));
    const auto base = aggregate(us);
    std::vector<ScalarField> perm{us[3], us[0], us[4], us[2], us[1]};
    const auto other = aggregate(perm);
    CHECK(max_abs_diff(base.mean, other.mean) < 1e-15);
    CHECK(max_abs_diff(base.sd, other.sd) < 1e-15);
    for (double v : base.mean.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({ScalarField(g), ScalarField(unit_grid(3))}), std::invalid_argument);
}

TEST_CASE("run_windows") {
  const auto truth = ScalarField::sample(unit_grid(24), [](double x, double y) { return 0.3 * std::exp(-0.5 * (x * x + y * y)); });
  const auto fd = particle_data(truth, 20000, 61, 12, 8);
  const auto fp = solver_on(12);
  InverseConfig inv;
  inv.n_max = 20;

  SUBCASE("one window equals a single solve") {
    const auto res = run_windows(fd, WindowPlan{1, 1}, inv, fp);
    FpConfig single = fp;
    single.dt = fd.dt;
    single.n_steps = fd.size() - 1;
    const auto direct = ncg_minimize(fd.frames[0], fd, inv, single);
    REQUIRE(res.windows.size() == 1);
    CHECK(res.windows[0].potential == direct.potential);
    CHECK(res.windows[0].report.iterates.size() == direct.report.iterates.size());
    CHECK_FALSE(res.sd_defined);
    CHECK(res.complete);
  }

  SUBCASE("chained windows") {
    std::vector<std::size_t> seen;
    const auto res = run_windows(fd, WindowPlan{3, 2}, inv, fp, [&](std::size_t w, const NcgIterate&) { seen.push_back(w); });
    REQUIRE(res.windows.size() == 3);
    CHECK(res.complete);
    CHECK(res.sd_defined);
    CHECK(std::is_sorted(seen.begin(), seen.end()));
    CHECK(seen.back() == 2);
    CHECK(res.windows[0].initial_density == fd.frames[0]);
    for (const auto& w : res.windows) CHECK(integrate(w.initial_density) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.windows[1].first_frame == 20);
    CHECK(res.windows[2].last_frame == 60);
    // the chained start of window 2 is the forward solution under window 1's potential
    FpConfig w1 = fp;
    w1.dt = fd.dt / 2.0;
    w1.n_steps = 40;
    const auto end1 = solve_forward(res.windows[0].initial_density, res.windows[0].potential, w1).final_state();
    CHECK(max_abs_diff(end1, res.windows[1].initial_density) < 1e-14);

    const auto agg = aggregate({res.windows[0].potential, res.windows[1].potential, res.windows[2].potential});
    CHECK(agg.mean == res.mean);
    CHECK(agg.sd == res.sd);
    for (double v : res.sd.values()) CHECK(v >= 0.0);
  }

  SUBCASE("zero-drift negative control") {
    // the same pipeline on data without drift: scaled window potentials
    // are noise and disagree much more than for a real well
    const auto flat = particle_data(ScalarField(unit_grid(24)), 20000, 61, 12, 8);
    const auto control = run_windows(flat, WindowPlan{3, 1}, inv, fp);
    const auto signal = run_windows(fd, WindowPlan{3, 1}, inv, fp);
    const double sd_control = mean_of(control.sd), sd_signal = mean_of(signal.sd);
    MESSAGE("mean sd: control " << sd_control << ", signal " << sd_signal);
    CHECK(sd_control > 0.15);
    CHECK(sd_control > 1.5 * sd_signal);
  }

  SUBCASE("a failing window returns partial results") {
    FrameSequence bad = fd;
    for (double& v : bad.frames[45].values()) v = std::nan("");
    const auto res = run_windows(bad, WindowPlan{3, 1}, inv, fp);
    CHECK_FALSE(res.complete);
    CHECK(res.windows.size() == 2);
    CHECK_FALSE(res.failure.empty());
  }
}
