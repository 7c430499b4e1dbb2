#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sampa/pipeline.hpp"
#include "sampa/problems.hpp"

namespace sampa {

/// C = (L^2 + L^3 + L^4 / (1 - c^2)) / 2. ConfigError unless 0 < c < 1 and L > 0.
double constant_C(double L, double c);

struct LyapunovValue {
  double value = 0.0;
  /// eta L >= 1: the difference term has a non-positive coefficient.
  bool nonpositive_coefficient = false;
};

/// V = f(x) + (1 - eta L)/2 ||grad f(x) - grad f(y)||^2, full batch.
LyapunovValue lyapunov(const ParamVector& x, const ParamVector& y, double eta, double L, const ProblemOracle& oracle);

struct DescentStep {
  std::size_t t = 0;
  double eta = 0.0;
  double v = 0.0;       ///< V_t
  double v_next = 0.0;  ///< V_{t+1}, with eta_{t+1}
  double decrease = 0.0;  ///< eta_t (1 - eta_t L / 2) ||grad f(x_t)||^2
  double budget = 0.0;    ///< eta_t^2 rho^2 C
  double residual = 0.0;  ///< v_next - v + decrease - budget
};

struct DescentReport {
  bool applicable = false;
  std::string reason;  ///< why the report is not applicable
  double L = 0.0;
  double c = 0.0;
  double C = 0.0;
  double rho = 0.0;
  double tol = 0.0;
  std::vector<DescentStep> steps;

  double max_residual() const;
  /// applicable and every residual <= tol.
  bool holds() const;
};

/// Checks V_{t+1} <= V_t - eta_t (1 - eta_t L/2) ||grad f(x_t)||^2 + eta_t^2 rho^2 C
/// on every step of a trace. The report is not applicable (rather than
/// failed) outside the regime: sampa_lambda with lambda = 0, plain SGD base,
/// full batch, convex oracle, every step recorded with iterates, x0 = y0,
/// non-increasing eta_t < min{1, c/L}.
DescentReport descent_check(const IterateTrace& trace, const ProblemOracle& oracle, double rho, double L, double c);

enum class StepsizeCase { none, case1_optimal, case2_half_inverse_L, case3_unit };

std::string_view to_string(StepsizeCase c) noexcept;

struct BoundStep {
  std::size_t t = 0;
  double eta = 0.0;
  double weight = 0.0;  ///< eta_t (1 - eta_t L/2), normalized over t < T
  double grad_sq = 0.0;  ///< ||grad f(x_t)||^2
};

struct BoundReport {
  bool applicable = false;
  std::string reason;
  double L = 0.0;
  double rho = 0.0;
  double C = 0.0;  ///< constant_C(L, 1/2)
  double delta0 = 0.0;
  std::size_t T = 0;
  std::vector<BoundStep> steps;

  double weight_sum = 0.0;  ///< sum of normalized weights (1 up to rounding)
  double weighted_lhs = 0.0;
  /// (Delta0 + ||grad f(x0) - grad f(y0)||^2/2 + C rho^2 sum eta_t^2) / sum eta_t (1 - eta_t L/2)
  double weighted_rhs = 0.0;
  double min_lhs = 0.0;  ///< min_{t<T} ||grad f(x_t)||^2
  double mean_lhs = 0.0;  ///< (1/T) sum_{t<T} ||grad f(x_t)||^2
  /// (8/3)(2 L Delta0 / T + rho sqrt(Delta0 C) / sqrt(T))
  double min_rhs = 0.0;
  /// Fixed-step runs: which case of the step-size formula the run is in,
  /// and the case's bound on mean_lhs.
  StepsizeCase fixed_case = StepsizeCase::none;
  double case_rhs = 0.0;

  bool weighted_holds() const { return applicable && weighted_lhs <= weighted_rhs; }
  bool min_holds() const { return applicable && min_lhs <= min_rhs; }
  bool case_holds() const { return applicable && fixed_case != StepsizeCase::none && mean_lhs <= case_rhs; }
};

/// Evaluates the averaged-gradient bounds on a trace (same regime as
/// descent_check with c = 1/2, except that eta_t = 1/(2L) is admitted).
/// delta0 = f(x0) - inf f; pass nullopt when inf f is unknown and the report
/// comes back not applicable.
BoundReport theorem_bound(const IterateTrace& trace, const ProblemOracle& oracle, double rho, double L,
                          std::optional<double> delta0);

/// f(x0) - inf f from the oracle's infimum, if it has one.
std::optional<double> initial_gap(const ProblemOracle& oracle, const ParamVector& x0);

struct AlignmentPoint {
  std::size_t t = 0;
  std::optional<double> cosine;  ///< undefined when either gradient is zero
  double distance = 0.0;
};

/// cos(grad f(x_t), grad f(y_t)) and ||grad f(x_t) - grad f(y_t)|| on every
/// recorded row that carries x_t and y_t. Full batch.
std::vector<AlignmentPoint> grad_alignment(const IterateTrace& trace, const ProblemOracle& oracle);

/// Writes grad_alignment into the rows' cos_xy / dist_xy fields.
void annotate_alignment(IterateTrace& trace, const std::vector<AlignmentPoint>& points);

/// Median cosine over the last `fraction` of points with a defined cosine.
std::optional<double> tail_median_cosine(const std::vector<AlignmentPoint>& points, double fraction);

/// Largest local curvature estimate over the recorded iterates.
double estimate_trace_smoothness(const IterateTrace& trace, const ProblemOracle& oracle, std::uint64_t seed,
                                 std::size_t probes = 8);

/// One row per step plus a final `summary` row.
void write_descent_csv(std::ostream& out, const DescentReport& report);
void write_bound_csv(std::ostream& out, const BoundReport& report);
void write_descent_csv(const std::filesystem::path& path, const DescentReport& report);
void write_bound_csv(const std::filesystem::path& path, const BoundReport& report);

}  // namespace sampa
