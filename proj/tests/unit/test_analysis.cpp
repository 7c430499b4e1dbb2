#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sampa/analysis.hpp"
#include "sampa/errors.hpp"
#include "test_support.hpp"

namespace sampa {
namespace {

RunConfig sampa0(double rho, Schedule schedule, std::size_t T, std::uint64_t seed = 1) {
  RunConfig c;
  c.spec.method = Method::sampa_lambda;
  c.spec.rho = rho;
  c.spec.lambda = 0.0;
  c.schedule = schedule;
  c.T = T;
  c.seed = seed;
  return c;
}

TEST(ConstantC, Examples) {
  EXPECT_NEAR(constant_C(1.0, 0.5), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(constant_C(2.0, 0.5), 50.0 / 3.0, 1e-13);
  // c = 1/2 also equals (L^2 + L^3)/2 + 2 L^4 / 3
  for (double L : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(constant_C(L, 0.5), (L * L + L * L * L) / 2.0 + 2.0 * std::pow(L, 4) / 3.0, 1e-12);
  }
  EXPECT_NEAR(constant_C(3.0, 1e-9), (9.0 + 27.0 + 81.0) / 2.0, 1e-12);
}

TEST(ConstantC, MonotoneInBothArguments) {
  double prev = 0.0;
  for (double L = 0.1; L < 5.0; L += 0.1) {
    const double v = constant_C(L, 0.5);
    EXPECT_GT(v, prev);
    prev = v;
  }
  prev = 0.0;
  for (double c = 0.05; c < 1.0; c += 0.05) {
    const double v = constant_C(1.5, c);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(ConstantC, RejectsOutOfRange) {
  EXPECT_THROW(constant_C(1.0, 0.0), ConfigError);
  EXPECT_THROW(constant_C(1.0, 1.0), ConfigError);
  EXPECT_THROW(constant_C(0.0, 0.5), ConfigError);
}

TEST(Lyapunov, HandExample) {
  const ToyQuadratic f(2);
  const auto v = lyapunov({1.0, 0.0}, {0.5, 0.0}, 0.1, 2.0, f);
  EXPECT_NEAR(v.value, 1.4, 1e-15);
  EXPECT_FALSE(v.nonpositive_coefficient);
}

TEST(Lyapunov, EqualPointsGiveObjective) {
  const auto f = make_random_psd_quadratic(6, 2.0, 0.1, 4);
  const ParamVector x = f->initial_point(2);
  EXPECT_EQ(lyapunov(x, x, 0.3, 2.0, *f).value, f->full_value(x));
}

TEST(Lyapunov, FlagsLargeSteps) {
  const ToyQuadratic f(2);
  const auto v = lyapunov({1.0, 0.0}, {0.5, 0.0}, 0.6, 2.0, f);
  EXPECT_TRUE(v.nonpositive_coefficient);
  EXPECT_NEAR(v.value, 1.0 + 0.5 * (1.0 - 1.2) * 1.0, 1e-15);
}

TEST(DescentCheck, HoldsOnRandomQuadratic) {
  const auto f = make_random_psd_quadratic(10, 1.0, 0.1, 11);
  const double L = *f->lipschitz();
  const auto trace = run_serial(*f, sampa0(0.05, Schedule::inverse_power(0.2 / L, 0.6), 200));
  const auto report = descent_check(trace, *f, 0.05, L, 0.5);
  ASSERT_TRUE(report.applicable) << report.reason;
  EXPECT_TRUE(report.holds()) << report.max_residual();
  EXPECT_EQ(report.steps.size(), 200u);
  EXPECT_NEAR(report.C, constant_C(L, 0.5), 0.0);
  EXPECT_NEAR(report.tol, 1e-10 * std::max(1.0, std::abs(report.steps[0].v)), 0.0);
  EXPECT_EQ(report.steps[0].v, f->full_value(trace.rows[0].x));
  for (const auto& s : report.steps) {
    EXPECT_TRUE(std::isfinite(s.residual));
    EXPECT_LE(s.v_next, s.v + s.budget + report.tol);
  }
}

TEST(DescentCheck, NotApplicableOutsideRegime) {
  const auto f = make_random_psd_quadratic(5, 1.0, 0.1, 2);
  const double L = 1.0;
  const auto good = sampa0(0.05, Schedule::inverse_power(0.2, 0.6), 20);
  const auto trace = run_serial(*f, good);
  EXPECT_TRUE(descent_check(trace, *f, 0.05, L, 0.5).applicable);

  auto lambda = good;
  lambda.spec.lambda = 0.2;
  EXPECT_FALSE(descent_check(run_serial(*f, lambda), *f, 0.05, L, 0.5).applicable);

  auto big_step = good;
  big_step.schedule = Schedule::constant(0.6);  // >= c / L
  EXPECT_FALSE(descent_check(run_serial(*f, big_step), *f, 0.05, L, 0.5).applicable);

  auto increasing = trace;
  increasing.rows[5].eta = increasing.rows[4].eta * 1.01;
  EXPECT_FALSE(descent_check(increasing, *f, 0.05, L, 0.5).applicable);

  auto sparse = good;
  sparse.record_every = 2;
  EXPECT_FALSE(descent_check(run_serial(*f, sparse), *f, 0.05, L, 0.5).applicable);

  auto momentum = good;
  momentum.spec.base.momentum = 0.5;
  EXPECT_FALSE(descent_check(run_serial(*f, momentum), *f, 0.05, L, 0.5).applicable);

  const auto lr = make_logistic_regression(40, 3, 1);
  auto minibatch = good;
  minibatch.batch_size = 8;
  EXPECT_FALSE(descent_check(run_serial(*lr, minibatch), *lr, 0.05, *lr->lipschitz(), 0.5).applicable);

  const auto mlp = make_tiny_mlp(20, 2, 3, 1);
  EXPECT_FALSE(descent_check(run_serial(*mlp, good), *mlp, 0.05, 1.0, 0.5).applicable);

  EXPECT_FALSE(descent_check(trace, *f, 0.1, L, 0.5).applicable);  // rho differs from the run
  const auto report = descent_check(trace, *f, 0.05, L, 0.5);
  EXPECT_TRUE(report.reason.empty());
}

TEST(TheoremBound, HoldsOnQuadraticsAcrossHorizons) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto f = make_random_psd_quadratic(8, 2.0, 0.1, seed);
    const double L = *f->lipschitz();
    const double rho = 0.05;
    const ParamVector x0 = f->initial_point(seed);
    const double delta0 = *initial_gap(*f, x0);
    for (std::size_t T : {10u, 100u, 1000u}) {
      auto c = sampa0(rho, Schedule::theorem1(delta0, rho, constant_C(L, 0.5), L, T), T, seed);
      c.x0 = x0;
      const auto report = theorem_bound(run_serial(*f, c), *f, rho, L, delta0);
      ASSERT_TRUE(report.applicable) << report.reason;
      EXPECT_TRUE(report.weighted_holds()) << seed << " " << T;
      EXPECT_TRUE(report.min_holds()) << seed << " " << T;
      EXPECT_NEAR(report.weight_sum, 1.0, 1e-12);
      EXPECT_LE(report.min_lhs, report.mean_lhs);
      EXPECT_GE(report.min_lhs, 0.0);
    }
  }
}

TEST(TheoremBound, CaseOneStepAtLongHorizon) {
  const auto f = make_random_psd_quadratic(10, 2.0, 0.1, 5);
  const double L = *f->lipschitz();
  const double rho = 0.1;
  const std::size_t T = 10000;
  // start one unit from the minimizer so the tuned step is below 1/(2L)
  ParamVector x0 = *f->minimizer();
  x0[0] += 1.0;
  const double delta0 = *initial_gap(*f, x0);
  const double C = constant_C(L, 0.5);
  const Schedule s = Schedule::theorem1(delta0, rho, C, L, T);
  ASSERT_LT(std::sqrt(delta0 / (C * rho * rho * T)), 1.0 / (2.0 * L));
  auto c = sampa0(rho, s, T);
  c.x0 = x0;
  c.keep_iterates = true;
  const auto report = theorem_bound(run_serial(*f, c), *f, rho, L, delta0);
  ASSERT_TRUE(report.applicable) << report.reason;
  EXPECT_EQ(report.fixed_case, StepsizeCase::case1_optimal);
  EXPECT_NEAR(report.case_rhs, 8.0 / 3.0 * rho * std::sqrt(delta0 * C) / std::sqrt(double(T)), 1e-15);
  EXPECT_TRUE(report.case_holds()) << report.mean_lhs << " vs " << report.case_rhs;
}

TEST(TheoremBound, UnknownGapIsNotApplicable) {
  const auto f = make_random_psd_quadratic(4, 1.0, 0.1, 1);
  const auto trace = run_serial(*f, sampa0(0.05, Schedule::constant(0.1), 10));
  const auto report = theorem_bound(trace, *f, 0.05, 1.0, std::nullopt);
  EXPECT_FALSE(report.applicable);
  EXPECT_FALSE(report.weighted_holds());
  EXPECT_FALSE(initial_gap(*make_tiny_mlp(10, 2, 2, 1), ParamVector(9)).has_value());
}

TEST(TheoremBound, InitialGapMatchesClosedForm) {
  const PsdQuadratic f(DenseMatrix::identity(2), {1.0, 0.0});
  EXPECT_NEAR(*initial_gap(f, {0.0, 0.0}), 0.5, 1e-15);
  EXPECT_NEAR(*initial_gap(ToyQuadratic(2), {1.0, 1.0}), 2.0, 0.0);
}

TEST(Alignment, EqualPointsAreAligned) {
  const auto f = make_random_psd_quadratic(5, 1.0, 0.1, 2);
  // rho = 0, lambda = 0 full batch: y_t and x_t coincide
  auto c = sampa0(0.0, Schedule::constant(0.1), 20);
  const auto trace = run_serial(*f, c);
  const auto points = grad_alignment(trace, *f);
  ASSERT_EQ(points.size(), trace.rows.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (trace.rows[i].x == trace.rows[i].y) {
      EXPECT_EQ(points[i].cosine, 1.0);
      EXPECT_EQ(points[i].distance, 0.0);
    }
  }
  EXPECT_EQ(points[0].cosine, 1.0);
}

TEST(Alignment, ZeroGradientIsUndefined) {
  const ToyQuadratic f(2);
  auto c = sampa0(0.1, Schedule::constant(0.1), 3);
  c.x0 = ParamVector{0.0, 0.0};
  const auto points = grad_alignment(run_serial(f, c), f);
  EXPECT_FALSE(points[0].cosine.has_value());
}

TEST(Alignment, TailMedian) {
  std::vector<AlignmentPoint> pts;
  for (std::size_t t = 0; t < 10; ++t) pts.push_back({t, 0.1 * double(t), 0.0});
  pts.push_back({10, std::nullopt, 0.0});
  EXPECT_NEAR(*tail_median_cosine(pts, 0.3), 0.8, 1e-15);
  EXPECT_NEAR(*tail_median_cosine(pts, 0.2), 0.85, 1e-15);
  EXPECT_FALSE(tail_median_cosine({}, 0.1).has_value());
}

TEST(Alignment, DistanceEventuallyBelowInitialOnQuadratic) {
  const auto f = make_random_psd_quadratic(10, 2.0, 0.1, 3);
  auto c = sampa0(0.05, Schedule::inverse_power(0.2, 0.6), 300);
  const auto points = grad_alignment(run_serial(*f, c), *f);
  // x0 == y0, so compare with the first step that separated them
  EXPECT_LT(points.back().distance, points[1].distance);
}

TEST(ReportCsv, SummaryRowPresent) {
  const auto f = make_random_psd_quadratic(4, 1.0, 0.1, 1);
  const auto trace = run_serial(*f, sampa0(0.05, Schedule::inverse_power(0.2, 0.6), 5));
  std::stringstream d, b;
  write_descent_csv(d, descent_check(trace, *f, 0.05, 1.0, 0.5));
  write_bound_csv(b, theorem_bound(trace, *f, 0.05, 1.0, initial_gap(*f, trace.rows[0].x)));
  std::string line, last;
  std::size_t lines = 0;
  while (std::getline(d, line)) {
    ++lines;
    last = line;
  }
  EXPECT_EQ(lines, 1u + 5u + 1u);
  EXPECT_EQ(last.rfind("summary,", 0), 0u);
  EXPECT_NE(b.str().find("\nsummary,"), std::string::npos);
}

}  // namespace
}  // namespace sampa
