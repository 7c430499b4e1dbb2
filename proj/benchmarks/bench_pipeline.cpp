#include <benchmark/benchmark.h>

#include "sampa/pipeline.hpp"

namespace {

using namespace sampa;

// Whole runs of T = 100 steps; range(0) is the number of samples, so the
// gradient cost grows while the per-step exchange cost stays fixed.
RunConfig run_config() {
  RunConfig c;
  c.spec.method = Method::sampa_lambda;
  c.spec.rho = 0.1;
  c.spec.lambda = 0.2;
  c.schedule = Schedule::constant(0.1);
  c.T = 100;
  c.record_every = 100;
  c.keep_iterates = false;
  return c;
}

void BM_SerialRun(benchmark::State& st) {
  const auto f = make_logistic_regression(static_cast<std::size_t>(st.range(0)), 50, 1);
  const RunConfig c = run_config();
  for (auto _ : st) benchmark::DoNotOptimize(run_serial(*f, c));
}

void BM_TwoWorkerRun(benchmark::State& st) {
  const auto f = make_logistic_regression(static_cast<std::size_t>(st.range(0)), 50, 1);
  const RunConfig c = run_config();
  for (auto _ : st) benchmark::DoNotOptimize(run_parallel_two_workers(*f, c));
}

void BM_SamRun(benchmark::State& st) {
  const auto f = make_logistic_regression(static_cast<std::size_t>(st.range(0)), 50, 1);
  RunConfig c = run_config();
  c.spec.method = Method::sam;
  for (auto _ : st) benchmark::DoNotOptimize(run_serial(*f, c));
}

}  // namespace

BENCHMARK(BM_SamRun)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SerialRun)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TwoWorkerRun)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
