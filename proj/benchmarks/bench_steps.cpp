#include <benchmark/benchmark.h>

#include "sampa/optimizers.hpp"

namespace {

using namespace sampa;

OptimizerSpec spec_of(Method m) {
  OptimizerSpec s;
  s.method = m;
  s.rho = 0.05;
  s.lambda = 0.2;
  return s;
}

// logistic regression, n = 512, d = range(0), one minibatch of 64
struct Fixture {
  explicit Fixture(std::size_t dim)
      : f(make_logistic_regression(512, dim, 1)), sampler(512, 64, SeededRng(1)), b0(sampler.next()),
        b1(sampler.next()), x0(f->initial_point(1)) {}
  std::shared_ptr<const LogisticRegression> f;
  BatchSampler sampler;
  Batch b0, b1;
  ParamVector x0;
};

void BM_Sgd(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::sgd);
  PlainState s = make_plain_state(fx.x0);
  for (auto _ : st) benchmark::DoNotOptimize(sgd_step(s, 0.1, spec, *fx.f, fx.b0));
}

void BM_Sam(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::sam);
  PlainState s = make_plain_state(fx.x0);
  for (auto _ : st) benchmark::DoNotOptimize(sam_step(s, 0.1, spec, *fx.f, fx.b0));
}

void BM_RandSam(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::randsam);
  PlainState s = make_plain_state(fx.x0);
  SeededRng rng(3);
  for (auto _ : st) benchmark::DoNotOptimize(randsam_step(s, 0.1, spec, *fx.f, fx.b0, rng));
}

void BM_OptSam(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::optsam);
  const OptSamState s = optsam_init(fx.x0, *fx.f, fx.b0);
  for (auto _ : st) benchmark::DoNotOptimize(optsam_step(s, 0.1, spec, *fx.f, fx.b0));
}

void BM_OptGd(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::optgd);
  const OptGdState s = optgd_init(fx.x0);
  for (auto _ : st) benchmark::DoNotOptimize(optgd_step(s, 0.1, spec, *fx.f, fx.b0, fx.b1));
}

void BM_Sampa(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  const auto spec = spec_of(Method::sampa_lambda);
  const SampaState s = sampa_init(fx.x0, *fx.f, fx.b0);
  for (auto _ : st) benchmark::DoNotOptimize(sampa_step(s, 0.1, spec, *fx.f, fx.b0, fx.b1));
}

void BM_Gradient(benchmark::State& st) {
  Fixture fx(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(fx.f->gradient(fx.x0, fx.b0));
}

}  // namespace

BENCHMARK(BM_Gradient)->Arg(20)->Arg(200);
BENCHMARK(BM_Sgd)->Arg(20)->Arg(200);
BENCHMARK(BM_Sam)->Arg(20)->Arg(200);
BENCHMARK(BM_RandSam)->Arg(20)->Arg(200);
BENCHMARK(BM_OptSam)->Arg(20)->Arg(200);
BENCHMARK(BM_OptGd)->Arg(20)->Arg(200);
BENCHMARK(BM_Sampa)->Arg(20)->Arg(200);

BENCHMARK_MAIN();
