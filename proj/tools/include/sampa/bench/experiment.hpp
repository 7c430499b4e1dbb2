#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sampa/bench/config.hpp"

namespace sampa::bench {

/// Outcome of one (method, seed) pair. Final values are read from the last
/// trace row, exactly as written to the trace CSV.
struct PairResult {
  std::string label;
  Method method = Method::sgd;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::optional<std::size_t> failed_step;
  std::filesystem::path trace_file;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  std::uint64_t seq_grads = 0;
  std::uint64_t total_grads = 0;
  double sim_time = 0.0;
};

/// Aggregates over the successful seeds of one method (std is the sample
/// standard deviation, 0 for a single seed).
struct MethodSummary {
  std::string label;
  Method method = Method::sgd;
  double rho = 0.0;
  double lambda = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double final_f_mean = 0.0;
  double final_f_std = 0.0;
  double final_grad_norm_mean = 0.0;
  double final_grad_norm_std = 0.0;
  double seq_grads_mean = 0.0;
  double total_grads_mean = 0.0;
  double sim_time_mean = 0.0;
  /// SAM's simulated time for the same T divided by this method's.
  double speedup_vs_sam = 1.0;
};

struct ComparisonSummary {
  std::vector<MethodSummary> methods;

  const MethodSummary* find(std::string_view label) const;
};

/// Builds the summary from pair results, in method declaration order.
ComparisonSummary summarize(const std::vector<MethodEntry>& methods, const std::vector<PairResult>& pairs,
                            const TimingModel& timing, std::size_t T);

void write_summary_csv(std::ostream& out, const ComparisonSummary& summary);

struct ExperimentResult {
  ComparisonSummary summary;
  std::vector<PairResult> pairs;  ///< method-major, then seed order
  std::vector<std::filesystem::path> artifacts;  ///< relative to out_dir
  std::string config_hash;

  bool all_ok() const;
};

/// Runs every (method, seed) pair, up to `jobs` at a time. Writes into
/// config.out_dir: trace_<label>_seed<s>.csv per pair, summary.csv,
/// plot_vs_step.csv, plot_vs_time.csv, failures.csv (if any), the optional
/// analysis reports, config.ini and MANIFEST. ConfigError when a pair's
/// configuration cannot run at all; failures during a run are recorded per
/// pair and the remaining pairs continue.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

struct LambdaPoint {
  double lambda = 0.0;
  MethodSummary summary;
};

struct SweepResult {
  std::vector<LambdaPoint> points;
  ExperimentResult experiment;
};

/// Runs sampa_lambda once per lambda (template: the config's first method,
/// if any) and adds lambda_sweep.csv. ConfigError for lambda outside [0, 1].
SweepResult lambda_sweep(const ExperimentConfig& config, const std::vector<double>& lambdas, std::size_t jobs = 1);

}  // namespace sampa::bench
