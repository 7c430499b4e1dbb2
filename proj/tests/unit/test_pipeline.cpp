#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "sampa/errors.hpp"
#include "sampa/pipeline.hpp"
#include "test_support.hpp"

namespace sampa {
namespace {

using namespace std::chrono_literals;
using testing::InstrumentedOracle;

RunConfig make_config(Method m, double rho, double lambda, double eta, std::size_t T) {
  RunConfig c;
  c.spec.method = m;
  c.spec.rho = rho;
  c.spec.lambda = lambda;
  c.schedule = Schedule::constant(eta);
  c.T = T;
  return c;
}

void expect_same_iterates(const IterateTrace& a, const IterateTrace& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    ASSERT_EQ(a.rows[i].x, b.rows[i].x) << "row " << i;
    ASSERT_EQ(a.rows[i].y, b.rows[i].y) << "row " << i;
    ASSERT_EQ(a.rows[i].f, b.rows[i].f) << "row " << i;
  }
  EXPECT_EQ(a.final_x, b.final_x);
}

TEST(RunSerial, SamOneStepExample) {
  const ToyQuadratic f(2);
  RunConfig c = make_config(Method::sam, 0.1, 0.0, 0.1, 1);
  c.x0 = ParamVector{1.0, 0.0};
  const auto trace = run_serial(f, c);
  ASSERT_EQ(trace.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(trace.final_x[0], 0.78);
  EXPECT_DOUBLE_EQ(trace.rows[0].f, 1.0);
  EXPECT_DOUBLE_EQ(trace.rows[1].f, 0.78 * 0.78);
  EXPECT_EQ(trace.rows[1].t, 1u);
  EXPECT_EQ(trace.step_costs.size(), 1u);
}

TEST(RunSerial, SampaLambdaZeroMatchesSamOnToy) {
  const ToyQuadratic f(2);
  RunConfig c = make_config(Method::sampa_lambda, 0.1, 0.0, 0.1, 1);
  c.x0 = ParamVector{1.0, 0.0};
  const auto trace = run_serial(f, c);
  EXPECT_DOUBLE_EQ(trace.final_x[0], 0.78);
  EXPECT_EQ(trace.meta.init_cost, (GradCount{1, 1}));
}

TEST(RunSerial, GradientDescentMinimizesQuadratic) {
  const PsdQuadratic f(DenseMatrix::identity(2), {1.0, 0.0});
  RunConfig c = make_config(Method::sgd, 0.0, 0.0, 0.5, 1);
  c.x0 = ParamVector{0.0, 0.0};
  const auto trace = run_serial(f, c);
  EXPECT_EQ(trace.final_x, (ParamVector{0.5, 0.0}));
}

TEST(RunSerial, ConfigErrors) {
  const ToyQuadratic f(2);
  RunConfig c = make_config(Method::sam, 0.1, 0.0, 0.1, 0);
  EXPECT_THROW(run_serial(f, c), ConfigError);
  c.T = 5;
  c.record_every = 0;
  EXPECT_THROW(run_serial(f, c), ConfigError);
  c.record_every = 1;
  c.x0 = ParamVector{1.0};
  EXPECT_THROW(run_serial(f, c), ConfigError);
  c.x0.reset();
  c.spec.rho = -1.0;
  EXPECT_THROW(run_serial(f, c), ConfigError);
  const auto lr = make_logistic_regression(30, 3, 1);
  RunConfig b = make_config(Method::sgd, 0.0, 0.0, 0.1, 5);
  b.batch_size = 31;
  EXPECT_THROW(run_serial(*lr, b), ConfigError);
}

TEST(RunSerial, DeterministicForFixedSeed) {
  const auto f = make_logistic_regression(100, 5, 3);
  for (Method m : {Method::sgd, Method::sam, Method::randsam, Method::optsam, Method::optgd, Method::sampa_lambda}) {
    RunConfig c = make_config(m, 0.05, 0.2, 0.3, 40);
    c.batch_size = 10;
    c.seed = 17;
    expect_same_iterates(run_serial(*f, c), run_serial(*f, c));
  }
}

TEST(RunSerial, RecordEveryDoesNotChangeIterates) {
  const auto f = make_logistic_regression(90, 4, 2);
  RunConfig c = make_config(Method::sampa_lambda, 0.1, 0.2, 0.3, 95);
  c.batch_size = 9;
  const auto every = run_serial(*f, c);
  c.record_every = 10;
  const auto sparse = run_serial(*f, c);
  EXPECT_EQ(every.final_x, sparse.final_x);
  EXPECT_EQ(every.step_costs, sparse.step_costs);
  // rows 0, 10, ..., 90 and the final row 95
  ASSERT_EQ(sparse.rows.size(), 11u);
  for (const auto& row : sparse.rows) {
    const auto& ref = every.rows[row.t];
    EXPECT_EQ(row.x, ref.x);
    EXPECT_EQ(row.seq_grads_cum, ref.seq_grads_cum);
    EXPECT_EQ(row.total_grads_cum, ref.total_grads_cum);
  }
  EXPECT_EQ(sparse.rows.back().t, 95u);
}

TEST(RunSerial, CountersAreMonotoneAndMatchCostTable) {
  const auto f = make_logistic_regression(60, 3, 4);
  for (Method m : {Method::sgd, Method::sam, Method::randsam, Method::optsam, Method::optgd, Method::sampa_lambda}) {
    RunConfig c = make_config(m, 0.05, 0.2, 0.2, 30);
    c.batch_size = 6;
    const auto trace = run_serial(*f, c);
    const GradCount per_step = grad_eval_count(m);
    for (const auto& cost : trace.step_costs) EXPECT_EQ(cost, per_step) << to_string(m);
    for (std::size_t i = 1; i < trace.rows.size(); ++i) {
      EXPECT_GT(trace.rows[i].total_grads_cum, trace.rows[i - 1].total_grads_cum);
      EXPECT_GT(trace.rows[i].seq_grads_cum, trace.rows[i - 1].seq_grads_cum);
    }
    const auto& last = trace.rows.back();
    EXPECT_EQ(last.total_grads_cum, trace.meta.init_cost.total + 30u * per_step.total) << to_string(m);
    EXPECT_EQ(last.seq_grads_cum, trace.meta.init_cost.sequential + 30u * per_step.sequential) << to_string(m);
  }
}

TEST(RunSerial, FinalRowEtaFollowsSchedule) {
  const ToyQuadratic f(2);
  RunConfig c = make_config(Method::sgd, 0.0, 0.0, 0.1, 4);
  EXPECT_DOUBLE_EQ(run_serial(f, c).rows.back().eta, 0.1);
  c.schedule = Schedule::cosine(0.1);
  EXPECT_TRUE(std::isnan(run_serial(f, c).rows.back().eta));
}

TEST(RunSerial, BatchIdsFollowTheStream) {
  const auto f = make_logistic_regression(40, 3, 1);
  RunConfig c = make_config(Method::sampa_lambda, 0.05, 0.0, 0.1, 12);
  c.batch_size = 8;
  const auto trace = run_serial(*f, c);
  // init consumes batch 0, step t uses B_t and looks ahead to B_{t+1}
  for (std::size_t t = 0; t < 12; ++t) {
    EXPECT_EQ(trace.rows[t].batch_id_t, t);
    EXPECT_EQ(trace.rows[t].batch_id_t1, t + 1);
  }
}

TEST(RunSerial, OracleFailureCarriesStepIndex) {
  auto inner = make_logistic_regression(40, 3, 1);
  auto f = std::make_shared<InstrumentedOracle>(inner);
  // each row costs one full-gradient measurement and each sam step two
  // evaluations: calls 1 (row 0), 2-3 (step 0), 4 (row 1), 5-6 (step 1)
  f->throw_on_call(6);
  RunConfig c = make_config(Method::sam, 0.05, 0.0, 0.1, 10);
  try {
    run_serial(*f, c);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("injected failure"), std::string::npos);
  }
}

TEST(RunSerial, DivergenceIsReported) {
  const ToyQuadratic f(2);
  RunConfig c = make_config(Method::sgd, 0.0, 0.0, 1e154, 50);
  EXPECT_THROW(run_serial(f, c), StepFailure);
}

TEST(RunParallel, MatchesSerialBitForBit) {
  const auto lr = make_logistic_regression(120, 6, 5);
  const auto mlp = make_tiny_mlp(60, 3, 4, 2);
  const auto psd = make_random_psd_quadratic(8, 2.0, 0.1, 3);
  for (double lambda : {0.0, 0.2, 0.5, 1.0}) {
    RunConfig c = make_config(Method::sampa_lambda, 0.1, lambda, 0.2, 60);
    c.batch_size = 12;
    auto serial = run_serial(*lr, c);
    auto parallel = run_parallel_two_workers(*lr, c);
    expect_same_iterates(serial, parallel);
    EXPECT_EQ(parallel.barrier_count, 60u);
    EXPECT_TRUE(parallel.meta.parallel);

    c.batch_size = 0;
    expect_same_iterates(run_serial(*mlp, c), run_parallel_two_workers(*mlp, c));
    expect_same_iterates(run_serial(*psd, c), run_parallel_two_workers(*psd, c));
  }
}

TEST(RunParallel, MomentumAndAdamBases) {
  const auto f = make_logistic_regression(80, 4, 6);
  RunConfig c = make_config(Method::sampa_lambda, 0.1, 0.2, 0.05, 40);
  c.batch_size = 16;
  c.spec.base.momentum = 0.9;
  c.spec.base.weight_decay = 1e-3;
  expect_same_iterates(run_serial(*f, c), run_parallel_two_workers(*f, c));
  c.spec.base.kind = BaseKind::adamw_like;
  expect_same_iterates(run_serial(*f, c), run_parallel_two_workers(*f, c));
}

TEST(RunParallel, RejectsOtherMethods) {
  const ToyQuadratic f(2);
  for (Method m : {Method::sgd, Method::sam, Method::randsam, Method::optsam, Method::optgd}) {
    EXPECT_THROW(run_parallel_two_workers(f, make_config(m, 0.1, 0.0, 0.1, 3)), ConfigError);
  }
}

TEST(RunParallel, WorkerFailureSurfacesAsStepFailure) {
  auto inner = make_logistic_regression(40, 3, 1);
  auto f = std::make_shared<InstrumentedOracle>(inner);
  // init plus row measurement take two calls, then three per step
  // (two worker evaluations and the next row's measurement)
  f->throw_on_call(9);
  RunConfig c = make_config(Method::sampa_lambda, 0.05, 0.2, 0.1, 10);
  try {
    run_parallel_two_workers(*f, c);
    FAIL() << "expected StepFailure";
  } catch (const StepFailure& e) {
    EXPECT_LE(e.step(), 3u);
    EXPECT_GE(e.step(), 2u);
    EXPECT_NE(std::string(e.what()).find("injected failure"), std::string::npos);
  }
}

TEST(RunParallel, BarrierTimeoutFails) {
  auto inner = make_logistic_regression(40, 3, 1);
  auto f = std::make_shared<InstrumentedOracle>(inner);
  f->stall_on_call(4, 500ms);
  RunConfig c = make_config(Method::sampa_lambda, 0.05, 0.2, 0.1, 10);
  c.barrier_timeout = 50ms;
  EXPECT_THROW(run_parallel_two_workers(*f, c), StepFailure);
}

TEST(RunParallel, AuditPasses) {
  const auto f = make_logistic_regression(50, 3, 2);
  RunConfig c = make_config(Method::sampa_lambda, 0.05, 0.2, 0.1, 30);
  c.batch_size = 10;
  c.audit = true;
  EXPECT_NO_THROW(run_parallel_two_workers(*f, c));
  EXPECT_NO_THROW(run_serial(*f, c));
}

TEST(Timing, SpeedupExamples) {
  EXPECT_EQ(speedup_vs_sam({1.0, 0.0, 0.0}).value, 2.0);
  EXPECT_NEAR(speedup_vs_sam({1.0, 0.15, 0.0}).value, 2.0 / 1.15, 1e-12);
  const auto degenerate = speedup_vs_sam({0.0, 0.1, 0.1});
  EXPECT_TRUE(degenerate.degenerate);
  EXPECT_EQ(degenerate.value, 1.0);
  EXPECT_THROW(TimingModel({-1.0, 0.0, 0.0}).validate(), ConfigError);
}

TEST(Timing, SimulatedClockFromMeasuredCosts) {
  const ToyQuadratic f(2);
  const TimingModel model{1.0, 0.15, 0.0};
  const auto sam = run_serial(f, make_config(Method::sam, 0.1, 0.0, 0.1, 10));
  const auto sampa = run_serial(f, make_config(Method::sampa_lambda, 0.1, 0.0, 0.1, 10));
  const WallClock a = simulate_wall_clock(sam, model, Method::sam);
  const WallClock b = simulate_wall_clock(sampa, model, Method::sampa_lambda);
  EXPECT_DOUBLE_EQ(a.total, 20.0);
  EXPECT_DOUBLE_EQ(b.total, 11.5);
  EXPECT_NEAR(a.total / b.total, speedup_vs_sam(model).value, 1e-12);
  ASSERT_EQ(b.cumulative.size(), 10u);
  auto annotated = sampa;
  annotate_sim_time(annotated, b);
  EXPECT_EQ(annotated.rows[0].sim_time_cum, 0.0);
  EXPECT_DOUBLE_EQ(annotated.rows.back().sim_time_cum, 11.5);
}

TEST(TraceCsv, RoundTrip) {
  const auto f = make_logistic_regression(40, 3, 1);
  RunConfig c = make_config(Method::sampa_lambda, 0.05, 0.2, 0.1, 20);
  c.batch_size = 8;
  c.record_every = 3;
  auto trace = run_serial(*f, c);
  annotate_sim_time(trace, simulate_wall_clock(trace, {1.0, 0.1, 0.0}, Method::sampa_lambda));
  std::stringstream ss;
  write_trace_csv(ss, trace);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
            "t,f,grad_norm,seq_grads_cum,total_grads_cum,sim_time_cum,batch_id_t,batch_id_t1,cos_xy,dist_xy");
  const auto rows = read_trace_csv(ss);
  ASSERT_EQ(rows.size(), trace.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].t, trace.rows[i].t);
    EXPECT_EQ(rows[i].f, trace.rows[i].f);
    EXPECT_EQ(rows[i].grad_norm, trace.rows[i].grad_norm);
    EXPECT_EQ(rows[i].seq_grads_cum, trace.rows[i].seq_grads_cum);
    EXPECT_EQ(rows[i].sim_time_cum, trace.rows[i].sim_time_cum);
    EXPECT_EQ(rows[i].batch_id_t, trace.rows[i].batch_id_t);
    EXPECT_EQ(rows[i].batch_id_t1, trace.rows[i].batch_id_t1);
    EXPECT_FALSE(rows[i].cos_xy.has_value());
  }
}

}  // namespace
}  // namespace sampa
