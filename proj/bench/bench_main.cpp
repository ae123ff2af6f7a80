#include <random>

#include <benchmark/benchmark.h>

#include "quadflip/mpc.hpp"
#include "quadflip/trials.hpp"
#include "quadflip/verify.hpp"

using namespace quadflip;

static void BM_MpcSolveCold(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const mpc::MpcProblem problem =
      verify::random_problem(rng, static_cast<int>(state.range(0)), state.range(1) != 0);
  for (auto _ : state) benchmark::DoNotOptimize(mpc::solve(problem));
}
BENCHMARK(BM_MpcSolveCold)->ArgsProduct({{5, 10, 20}, {0, 1}})->Unit(benchmark::kMicrosecond);

static void BM_MpcSolveWarm(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const mpc::MpcProblem problem = verify::random_problem(rng, static_cast<int>(state.range(0)), true);
  const mpc::MpcSolution previous = mpc::solve(problem);
  for (auto _ : state) benchmark::DoNotOptimize(mpc::solve(problem, previous));
}
BENCHMARK(BM_MpcSolveWarm)->Arg(10)->Unit(benchmark::kMicrosecond);

static void BM_FlipTrialsParallel(benchmark::State& state) {
  const sim::SimConfig base = sim::default_config();
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_trials(base, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_FlipTrialsParallel)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_FlipTrialsSerial(benchmark::State& state) {
  const sim::SimConfig base = sim::default_config();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::run_trials_serial(base, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_FlipTrialsSerial)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
