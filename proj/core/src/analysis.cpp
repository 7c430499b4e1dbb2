#include "sampa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "sampa/errors.hpp"
#include "sampa/format.hpp"

namespace sampa {
namespace {

/// Empty when the trace lies inside the descent-lemma regime.
std::optional<std::string> regime_violation(const IterateTrace& trace, const ProblemOracle& oracle, double rho,
                                            double L, double c, bool need_final_eta, bool strict) {
  const TraceMeta& meta = trace.meta;
  if (meta.spec.method != Method::sampa_lambda) return "method is " + std::string(to_string(meta.spec.method));
  if (meta.spec.lambda != 0.0) return "lambda is not 0";
  if (meta.spec.rho != rho) return "rho differs from the run's rho";
  if (!(rho > 0.0)) return "rho must be > 0";
  const BaseSpec& base = meta.spec.base;
  if (base.kind != BaseKind::sgd_momentum || base.momentum != 0.0 || base.weight_decay != 0.0) {
    return "base optimizer is not plain SGD";
  }
  if (!meta.full_batch()) return "run is stochastic (batch_size < n_samples)";
  if (!oracle.is_convex()) return "oracle is not convex";
  if (!(L > 0.0)) return "L must be > 0";
  if (trace.rows.size() != meta.T + 1) return "trace does not record every step";
  for (std::size_t t = 0; t < trace.rows.size(); ++t) {
    const TraceRow& row = trace.rows[t];
    if (row.t != t) return "trace does not record every step";
    if (row.x.dim() == 0 || row.y.dim() == 0) return "trace has no iterates";
  }
  if (!(trace.rows.front().x == trace.rows.front().y)) return "x0 != y0";
  const double limit = std::min(1.0, c / L);
  const std::size_t last = need_final_eta ? meta.T : meta.T - 1;
  for (std::size_t t = 0; t <= last; ++t) {
    const double eta = trace.rows[t].eta;
    if (!std::isfinite(eta)) return "eta_" + std::to_string(t) + " is undefined";
    if (!(eta > 0.0 && (strict ? eta < limit : eta <= limit))) {
      return "eta_" + std::to_string(t) + " = " + format_double(eta) + " outside (0, min{1, c/L}" +
             (strict ? ")" : "]") + " with min{1, c/L} = " + format_double(limit);
    }
    if (t > 0 && eta > trace.rows[t - 1].eta) return "eta increases at t = " + std::to_string(t);
  }
  return std::nullopt;
}

}  // namespace

double constant_C(double L, double c) {
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("c must be in (0, 1)");
  if (!(L > 0.0)) throw ConfigError("L must be > 0");
  const double L2 = L * L;
  return 0.5 * (L2 + L2 * L + L2 * L2 / (1.0 - c * c));
}

LyapunovValue lyapunov(const ParamVector& x, const ParamVector& y, double eta, double L, const ProblemOracle& oracle) {
  const double coeff = 1.0 - eta * L;
  const double diff = norm_sq(oracle.full_gradient(x) - oracle.full_gradient(y));
  return {oracle.full_value(x) + 0.5 * coeff * diff, coeff <= 0.0};
}

double DescentReport::max_residual() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const DescentStep& s : steps) m = std::max(m, s.residual);
  return m;
}

bool DescentReport::holds() const {
  if (!applicable) return false;
  return std::all_of(steps.begin(), steps.end(),
                     [&](const DescentStep& s) { return std::isfinite(s.residual) && s.residual <= tol; });
}

DescentReport descent_check(const IterateTrace& trace, const ProblemOracle& oracle, double rho, double L, double c) {
  DescentReport report;
  report.L = L;
  report.c = c;
  report.C = constant_C(L, c);
  report.rho = rho;
  if (auto why = regime_violation(trace, oracle, rho, L, c, /*need_final_eta=*/true, /*strict=*/true)) {
    report.reason = *why;
    return report;
  }
  report.applicable = true;
  const auto& rows = trace.rows;
  std::vector<double> v(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) v[t] = lyapunov(rows[t].x, rows[t].y, rows[t].eta, L, oracle).value;
  report.tol = 1e-10 * std::max(1.0, std::abs(v[0]));
  report.steps.reserve(trace.meta.T);
  for (std::size_t t = 0; t < trace.meta.T; ++t) {
    DescentStep s;
    s.t = t;
    s.eta = rows[t].eta;
    s.v = v[t];
    s.v_next = v[t + 1];
    s.decrease = s.eta * (1.0 - s.eta * L / 2.0) * rows[t].grad_norm * rows[t].grad_norm;
    s.budget = s.eta * s.eta * rho * rho * report.C;
    s.residual = s.v_next - s.v + s.decrease - s.budget;
    report.steps.push_back(s);
  }
  return report;
}

std::string_view to_string(StepsizeCase c) noexcept {
  switch (c) {
    case StepsizeCase::none: return "none";
    case StepsizeCase::case1_optimal: return "case1";
    case StepsizeCase::case2_half_inverse_L: return "case2";
    case StepsizeCase::case3_unit: return "case3";
  }
  return "?";
}

std::optional<double> initial_gap(const ProblemOracle& oracle, const ParamVector& x0) {
  const auto inf = oracle.infimum();
  if (!inf) return std::nullopt;
  return oracle.full_value(x0) - *inf;
}

BoundReport theorem_bound(const IterateTrace& trace, const ProblemOracle& oracle, double rho, double L,
                          std::optional<double> delta0) {
  BoundReport report;
  report.L = L;
  report.rho = rho;
  report.C = constant_C(L, 0.5);
  report.T = trace.meta.T;
  if (!delta0) {
    report.reason = "inf f unknown, Delta0 unavailable";
    return report;
  }
  report.delta0 = *delta0;
  if (auto why = regime_violation(trace, oracle, rho, L, 0.5, /*need_final_eta=*/false, /*strict=*/false)) {
    report.reason = *why;
  } else {
    report.applicable = true;
  }
  if (trace.rows.size() < trace.meta.T || trace.meta.T == 0) {
    report.applicable = false;
    if (report.reason.empty()) report.reason = "trace does not record every step";
    return report;
  }

  const std::size_t T = trace.meta.T;
  const double C = report.C;
  double weight_total = 0.0;
  double eta_sq_sum = 0.0;
  double grad_sum = 0.0;
  report.min_lhs = std::numeric_limits<double>::infinity();
  report.steps.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const TraceRow& row = trace.rows[t];
    BoundStep s;
    s.t = t;
    s.eta = row.eta;
    s.weight = row.eta * (1.0 - row.eta * L / 2.0);
    s.grad_sq = row.grad_norm * row.grad_norm;
    weight_total += s.weight;
    eta_sq_sum += row.eta * row.eta;
    grad_sum += s.grad_sq;
    report.min_lhs = std::min(report.min_lhs, s.grad_sq);
    report.steps.push_back(s);
  }
  for (BoundStep& s : report.steps) {
    s.weight /= weight_total;
    report.weight_sum += s.weight;
    report.weighted_lhs += s.weight * s.grad_sq;
  }
  const TraceRow& first = trace.rows.front();
  double init_diff = 0.0;
  if (first.x.dim() > 0 && first.y.dim() > 0) {
    init_diff = norm_sq(oracle.full_gradient(first.x) - oracle.full_gradient(first.y));
  }
  report.weighted_rhs = (report.delta0 + 0.5 * init_diff + C * rho * rho * eta_sq_sum) / weight_total;
  report.mean_lhs = grad_sum / static_cast<double>(T);

  const double Td = static_cast<double>(T);
  const double stochastic_term = rho * std::sqrt(report.delta0 * C) / std::sqrt(Td);
  report.min_rhs = (8.0 / 3.0) * (2.0 * L * report.delta0 / Td + stochastic_term);

  const double eta0 = report.steps.front().eta;
  const bool fixed = std::all_of(report.steps.begin(), report.steps.end(),
                                 [&](const BoundStep& s) { return s.eta == eta0; });
  if (fixed) {
    const double optimal = std::sqrt(report.delta0 / (C * rho * rho * Td));
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
    if (close(eta0, optimal)) {
      report.fixed_case = StepsizeCase::case1_optimal;
      report.case_rhs = (8.0 / 3.0) * stochastic_term;
    } else if (eta0 < optimal && (close(eta0, 1.0 / (2.0 * L)) || close(eta0, 1.0))) {
      report.fixed_case = close(eta0, 1.0) ? StepsizeCase::case3_unit : StepsizeCase::case2_half_inverse_L;
      report.case_rhs = (4.0 / 3.0) * (2.0 * L * report.delta0 / Td + stochastic_term);
    }
  }
  return report;
}

std::vector<AlignmentPoint> grad_alignment(const IterateTrace& trace, const ProblemOracle& oracle) {
  std::vector<AlignmentPoint> points;
  points.reserve(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    if (row.x.dim() == 0 || row.y.dim() == 0) continue;
    AlignmentPoint p;
    p.t = row.t;
    if (row.x == row.y) {
      p.cosine = norm_sq(oracle.full_gradient(row.x)) > 0.0 ? std::optional<double>(1.0) : std::nullopt;
      p.distance = 0.0;
    } else {
      const ParamVector gx = oracle.full_gradient(row.x);
      const ParamVector gy = oracle.full_gradient(row.y);
      p.cosine = cosine_similarity(gx, gy);
      p.distance = distance(gx, gy);
    }
    points.push_back(p);
  }
  return points;
}

void annotate_alignment(IterateTrace& trace, const std::vector<AlignmentPoint>& points) {
  std::size_t k = 0;
  for (TraceRow& row : trace.rows) {
    while (k < points.size() && points[k].t < row.t) ++k;
    if (k < points.size() && points[k].t == row.t) {
      row.cos_xy = points[k].cosine;
      row.dist_xy = points[k].distance;
    }
  }
}

std::optional<double> tail_median_cosine(const std::vector<AlignmentPoint>& points, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  if (points.empty()) return std::nullopt;
  const auto tail = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(points.size())));
  std::vector<double> values;
  for (std::size_t i = points.size() - tail; i < points.size(); ++i) {
    if (points[i].cosine) values.push_back(*points[i].cosine);
  }
  if (values.empty()) return std::nullopt;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double estimate_trace_smoothness(const IterateTrace& trace, const ProblemOracle& oracle, std::uint64_t seed,
                                 std::size_t probes) {
  SeededRng rng(seed);
  double best = 0.0;
  for (const TraceRow& row : trace.rows) {
    if (row.x.dim() == 0) continue;
    best = std::max(best, estimate_local_smoothness(oracle, row.x, rng.split(row.t), probes));
  }
  return best;
}

void write_descent_csv(std::ostream& out, const DescentReport& r) {
  out << "t,eta,V_t,V_next,decrease,budget,residual\n";
  for (const DescentStep& s : r.steps) {
    out << s.t << ',' << format_double(s.eta) << ',' << format_double(s.v) << ',' << format_double(s.v_next) << ','
        << format_double(s.decrease) << ',' << format_double(s.budget) << ',' << format_double(s.residual) << '\n';
  }
  out << "summary,applicable=" << (r.applicable ? 1 : 0) << ",L=" << format_double(r.L)
      << ",c=" << format_double(r.c) << ",C=" << format_double(r.C) << ",tol=" << format_double(r.tol)
      << ",max_residual=" << (r.steps.empty() ? std::string() : format_double(r.max_residual()))
      << ",holds=" << (r.holds() ? 1 : 0) << '\n';
}

void write_bound_csv(std::ostream& out, const BoundReport& r) {
  out << "t,eta,weight,grad_sq\n";
  for (const BoundStep& s : r.steps) {
    out << s.t << ',' << format_double(s.eta) << ',' << format_double(s.weight) << ',' << format_double(s.grad_sq)
        << '\n';
  }
  out << "summary,applicable=" << (r.applicable ? 1 : 0) << ",delta0=" << format_double(r.delta0)
      << ",C=" << format_double(r.C) << ",weighted_lhs=" << format_double(r.weighted_lhs)
      << ",weighted_rhs=" << format_double(r.weighted_rhs) << ",min_lhs=" << format_double(r.min_lhs)
      << ",min_rhs=" << format_double(r.min_rhs) << ",case=" << to_string(r.fixed_case)
      << ",case_rhs=" << format_double(r.case_rhs) << '\n';
}

void write_descent_csv(const std::filesystem::path& path, const DescentReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_descent_csv(out, report);
}

void write_bound_csv(const std::filesystem::path& path, const BoundReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_bound_csv(out, report);
}

}  // namespace sampa
