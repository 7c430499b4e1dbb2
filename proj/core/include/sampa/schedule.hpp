#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace sampa {

enum class ScheduleKind { constant, cosine, inverse_power, theorem1 };

/// Upper cap of the theorem1 step size. `proof` caps at min{1/(2L), 1}, the
/// range the convergence argument needs; `printed` caps at max{1/(2L), 1}.
enum class Theorem1Cap { proof, printed };

std::string_view to_string(ScheduleKind kind) noexcept;
/// Accepts "constant", "cosine", "inverse-power" (or "inverse_power"), "theorem1".
ScheduleKind parse_schedule_kind(std::string_view name);

/// Step-size schedule eta_t.
///
/// - constant:      eta0
/// - cosine:        (eta0 / 2) * (1 + cos(pi t / T))
/// - inverse_power: eta0 / (1 + t)^power
/// - theorem1:      min{ sqrt(delta0) / (rho sqrt(C T)), cap } with the
///                  formula's own horizon `formula_T`; cap per Theorem1Cap
struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  double eta0 = 0.1;
  double power = 1.0;

  double delta0 = 0.0;
  double rho = 0.0;
  double smoothness_c = 0.0;  ///< the descent constant C
  double lipschitz = 0.0;
  std::size_t formula_T = 0;
  Theorem1Cap cap = Theorem1Cap::proof;

  static Schedule constant(double eta0);
  static Schedule cosine(double eta0);
  static Schedule inverse_power(double eta0, double power);
  static Schedule theorem1(double delta0, double rho, double constant_c, double lipschitz, std::size_t T,
                           Theorem1Cap cap = Theorem1Cap::proof);

  /// True when eta_t does not depend on the run horizon, so it can be
  /// evaluated past the last step.
  bool horizon_free() const noexcept { return kind != ScheduleKind::cosine; }

  /// Throws ConfigError for parameters that cannot produce positive steps.
  void validate() const;
};

/// eta_t for step t of a run with T steps. Requires t < T; T == 0 is a
/// ConfigError. The result is strictly positive.
double schedule_eta(const Schedule& s, std::size_t t, std::size_t T);

}  // namespace sampa
