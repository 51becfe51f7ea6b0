#include <benchmark/benchmark.h>

#include <cmath>

#include "fpsrm/analysis.hpp"
#include "fpsrm/binning.hpp"
#include "fpsrm/fp_solver.hpp"
#include "fpsrm/inverse.hpp"
#include "fpsrm/sde.hpp"

using namespace fpsrm;

namespace {

ScalarField rings(const Grid2D& g) { return make_target(TargetSpec{0.05, 0.25, 6.0}, g); }

FpConfig solver_config(std::size_t cells, std::size_t steps) {
  FpConfig fp;
  fp.grid = square_grid(Domain{}, cells);
  fp.dt = 0.03;
  fp.n_steps = steps;
  return fp;
}

// assembly + LU factorization of the two step matrices
void BM_SolverSetup(benchmark::State& state) {
  const FpConfig fp = solver_config(static_cast<std::size_t>(state.range(0)), 10);
  const ScalarField u = rings(fp.grid);
  for (auto _ : state) {
    FpSolver solver(u, fp);
    benchmark::DoNotOptimize(&solver);
  }
}
BENCHMARK(BM_SolverSetup)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ForwardSolve(benchmark::State& state) {
  const FpConfig fp = solver_config(static_cast<std::size_t>(state.range(0)), 100);
  const FpSolver solver(rings(fp.grid), fp);
  const ScalarField f0(fp.grid, 1.0 / 36.0);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve_forward(f0));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fp.n_steps));
}
BENCHMARK(BM_ForwardSolve)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

// one objective + adjoint gradient evaluation, i.e. the cost of an NCG step
void BM_Gradient(benchmark::State& state) {
  const FpConfig fp = solver_config(static_cast<std::size_t>(state.range(0)), 100);
  SdeConfig sde;
  sde.n_particles = 500;
  sde.n_frames = fp.n_steps + 1;
  const auto fd = bin_sequence(simulate(sde, rings(square_grid(Domain{}, 100))), fp.grid);
  const ReducedObjective problem(fd.frames[0], fd, InverseConfig{}, fp);
  const ScalarField u(fp.grid);
  for (auto _ : state) benchmark::DoNotOptimize(problem.gradient(u));
}
BENCHMARK(BM_Gradient)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  SdeConfig sde;
  sde.n_particles = static_cast<std::size_t>(state.range(0));
  sde.n_frames = 300;
  const ScalarField u = rings(square_grid(Domain{}, 200));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(sde, u));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 299);
}
BENCHMARK(BM_Simulate)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Binning(benchmark::State& state) {
  SdeConfig sde;
  sde.n_particles = 500;
  sde.n_frames = 300;
  const auto frames = simulate(sde, rings(square_grid(Domain{}, 100)));
  const Grid2D bins = square_grid(Domain{}, 50);
  for (auto _ : state) benchmark::DoNotOptimize(bin_sequence(frames, bins));
}
BENCHMARK(BM_Binning)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
