#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sampa/optimizers.hpp"
#include "sampa/problems.hpp"
#include "sampa/schedule.hpp"

namespace sampa {

struct RunConfig {
  OptimizerSpec spec;
  Schedule schedule = Schedule::constant(0.1);
  std::size_t T = 1;
  /// 0 means full batch (n_samples).
  std::size_t batch_size = 0;
  std::uint64_t seed = 42;
  std::size_t record_every = 1;
  /// Re-verify g_t == grad f(y_t, B_t) before every SAMPa step.
  bool audit = false;
  /// Store x_t, y_t and the step gradients in every recorded row.
  bool keep_iterates = true;
  /// Starting point; oracle.initial_point(seed) when empty.
  std::optional<ParamVector> x0;
  std::chrono::milliseconds barrier_timeout{30000};

  std::size_t effective_batch_size(const ProblemOracle& oracle) const noexcept {
    return batch_size == 0 ? oracle.n_samples() : batch_size;
  }
  /// Throws ConfigError (T >= 1, record_every >= 1, batch size, spec, schedule, x0 shape).
  void validate(const ProblemOracle& oracle) const;
};

/// One recorded iterate. Row t describes x_t (before step t is applied) and
/// the quantities step t computed; the final row t == T has no step data.
/// Cumulative counters include the initialization gradient of methods that
/// need one and everything spent to reach x_t.
struct TraceRow {
  std::size_t t = 0;
  double eta = 0.0;  ///< eta_t; NaN on the final row when the schedule depends on T
  double f = 0.0;    ///< full-batch f(x_t)
  double grad_norm = 0.0;  ///< full-batch ||grad f(x_t)||
  ParamVector x;
  ParamVector y;
  ParamVector g;        ///< gradient whose direction perturbed step t (g_t for SAMPa)
  ParamVector g_tilde;  ///< gradient at the perturbed point
  ParamVector direction;  ///< final gradient of step t
  std::optional<std::uint64_t> batch_id_t;
  std::optional<std::uint64_t> batch_id_t1;
  std::uint64_t total_grads_cum = 0;
  std::uint64_t seq_grads_cum = 0;
  double sim_time_cum = 0.0;
  std::optional<double> cos_xy;
  std::optional<double> dist_xy;
};

struct TraceMeta {
  std::string problem;
  OptimizerSpec spec;
  Schedule schedule;
  std::size_t T = 0;
  std::size_t batch_size = 0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool parallel = false;
  GradCount init_cost;

  bool full_batch() const noexcept { return batch_size == n_samples; }
};

struct IterateTrace {
  TraceMeta meta;
  std::vector<TraceRow> rows;
  /// Measured cost of every step (length T), independent of record_every.
  std::vector<GradCount> step_costs;
  /// x_T.
  ParamVector final_x;
  /// Completed exchange barriers (two-worker runs only).
  std::size_t barrier_count = 0;
};

/// Runs config.spec.method for T steps in one sequence. For sampa_lambda the
/// gradients of a step are evaluated back to back, g~_t before g_{t+1}.
/// Failures inside a step surface as StepFailure carrying the step index.
IterateTrace run_serial(const ProblemOracle& oracle, const RunConfig& config);

/// SAMPa-lambda on two worker threads with one exchange barrier per step.
/// Worker A evaluates g~_t = grad f(x~_t, B_t), worker B evaluates
/// g_{t+1} = grad f(y_{t+1}, B_{t+1}); after the barrier both form G_t and
/// x_{t+1} identically. Produces the same iterates as run_serial bit for
/// bit. ConfigError unless method == sampa_lambda.
IterateTrace run_parallel_two_workers(const ProblemOracle& oracle, const RunConfig& config);

/// Simulated per-operation costs (seconds).
struct TimingModel {
  double t_grad = 1.0;
  double t_comm = 0.0;
  double t_update = 0.0;

  void validate() const;
};

struct SpeedupEstimate {
  double value = 1.0;
  bool degenerate = false;  ///< t_grad == 0: no gradient cost to save
};

/// (2 t_grad + t_update) / (t_grad + t_comm + t_update).
SpeedupEstimate speedup_vs_sam(const TimingModel& model);

struct WallClock {
  std::vector<double> per_step;
  std::vector<double> cumulative;  ///< cumulative[t] = time spent through step t
  double total = 0.0;
  SpeedupEstimate speedup;
};

/// Per step: sequential_grads * t_grad + t_update, plus t_comm for
/// sampa_lambda (one exchange per step). Sequential counts come from the
/// trace's measured step costs.
WallClock simulate_wall_clock(const IterateTrace& trace, const TimingModel& model, Method method);

/// Stores the cumulative simulated time reached at each recorded x_t.
void annotate_sim_time(IterateTrace& trace, const WallClock& clock);

/// CSV with header t,f,grad_norm,seq_grads_cum,total_grads_cum,sim_time_cum,
/// batch_id_t,batch_id_t1,cos_xy,dist_xy. Missing values are empty fields.
void write_trace_csv(std::ostream& out, const IterateTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const IterateTrace& trace);

/// Reads back the columns written by write_trace_csv (vectors stay empty).
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

}  // namespace sampa
