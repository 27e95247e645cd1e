#include <benchmark/benchmark.h>

#include "eqstop/closedform.hpp"
#include "eqstop/pathsim.hpp"
#include "eqstop/rng.hpp"
#include "eqstop/verifier.hpp"

using namespace eqstop;

namespace {

const RealOptionProblem kFig1a{0.2, 3.0, 0.5, 0.2, 2.0};

void BM_Solve(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(closedform::solve(kFig1a));
}
BENCHMARK(BM_Solve);

void BM_CheckConditions(benchmark::State& state) {
  const auto sol = closedform::solve(kFig1a);
  const auto grid = verifier::default_grid(sol);
  const auto tol = verifier::Tolerances::for_solution(sol);
  for (auto _ : state) benchmark::DoNotOptimize(verifier::check_conditions(sol, grid, tol));
}
BENCHMARK(BM_CheckConditions);

void BM_FdSolve(benchmark::State& state) {
  const auto sol = closedform::solve(kFig1a);
  const double pins[] = {sol.strategy.lower, sol.strategy.upper};
  const auto grid =
      verifier::Grid::uniform(3e-3, 6.6, static_cast<std::size_t>(state.range(0)), pins);
  for (auto _ : state) benchmark::DoNotOptimize(verifier::fd_solve_w(kFig1a, sol.strategy, grid));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FdSolve)->Arg(1001)->Arg(2001)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_Philox(benchmark::State& state) {
  rng::Substream s(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(s.next_u64());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

void BM_SimulatePath(benchmark::State& state) {
  const auto sol = closedform::solve(kFig1a);
  const auto model = pathsim::SimModel::from(kFig1a);
  const pathsim::Strategy strategy = sol.strategy;
  pathsim::SimConfig cfg;
  cfg.dt = 1e-3;
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(pathsim::simulate_path(model, strategy, 2.9, cfg, i++));
}
BENCHMARK(BM_SimulatePath)->Unit(benchmark::kMicrosecond);

void BM_EstimateJ(benchmark::State& state) {
  const auto sol = closedform::solve(kFig1a);
  pathsim::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.n_paths = 1000;
  const double xs[] = {1.0, 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(pathsim::estimate_J(kFig1a, sol.strategy, cfg, xs));
}
BENCHMARK(BM_EstimateJ)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
