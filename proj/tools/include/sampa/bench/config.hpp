#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sampa/optimizers.hpp"
#include "sampa/pipeline.hpp"
#include "sampa/problems.hpp"
#include "sampa/schedule.hpp"

namespace sampa::bench {

/// Problem name plus generator parameters. Parameters a problem does not use
/// are ignored.
struct ProblemSpec {
  std::string name;
  std::size_t dim = 2;
  std::size_t n = 500;
  std::size_t hidden = 8;
  double lipschitz = 1.0;
  double min_eig = 0.1;
  double flip_fraction = 0.0;
  std::uint64_t seed = 1;  ///< data / matrix seed (independent of run seeds)

  /// Throws ConfigError for unknown names or invalid parameters.
  std::shared_ptr<const ProblemOracle> build() const;
};

inline constexpr std::string_view kProblemNames[] = {"toy_quadratic", "psd_quadratic", "logistic_regression",
                                                     "tiny_mlp"};

struct MethodEntry {
  std::string label;  ///< unique within an experiment; used in file names
  OptimizerSpec spec;
};

/// Schedule settings before they are bound to a problem. For theorem1 the
/// unset quantities are filled per run: delta0 = f(x0) - inf f, C from
/// (L, c = 1/2), L from the oracle, rho from the method.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double eta0 = 0.1;
  double power = 0.6;
  std::optional<double> delta0;
  std::optional<double> constant_c;
  std::optional<double> lipschitz;
  Theorem1Cap cap = Theorem1Cap::proof;

  Schedule resolve(const ProblemOracle& oracle, const ParamVector& x0, double rho, std::size_t T) const;
};

enum class Mode { serial, parallel };

std::string_view to_string(Mode m) noexcept;

enum class Analysis { none, descent, bound, alignment };

std::string_view to_string(Analysis a) noexcept;

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<MethodEntry> methods;
  ScheduleSpec schedule;
  std::size_t T = 1000;
  std::vector<std::uint64_t> seeds{42};
  std::size_t batch_size = 0;  ///< 0: full batch
  std::size_t record_every = 1;
  bool audit = false;
  std::optional<ParamVector> x0;
  Mode mode = Mode::serial;
  Analysis analysis = Analysis::none;
  TimingModel timing;
  std::filesystem::path out_dir = "out";
  /// Non-empty: run a lambda sweep over these values instead of `methods`.
  std::vector<double> sweep_lambdas;

  /// Throws ConfigError on inconsistent settings (no method, no seed,
  /// duplicate labels, parallel mode with a non-sampa method, ...).
  void validate() const;
};

/// Default rho: 0.05 for the SAM family, doubled for sampa_lambda with lambda > 0.
double default_rho(Method method, double lambda);
inline constexpr double kDefaultLambda = 0.2;

/// Parses the sectioned key = value format:
///
///   [problem]   name, dim, n, hidden, lipschitz, min_eig, flip_fraction, seed
///   [method]    name, label, rho, lambda, base, momentum, weight_decay,
///               beta1, beta2, adam_eps          (repeatable)
///   [schedule]  kind, eta0, power, delta0, c, lipschitz, cap
///   [run]       T, seeds, batch_size, record_every, audit, x0, mode, analysis, out
///   [timing]    t_grad, t_comm, t_update
///   [sweep]     lambdas
///
/// '#' starts a comment. Errors carry the line number; duplicate keys name
/// both lines. The result is validated.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& config);

/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace sampa::bench
