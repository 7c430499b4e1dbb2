#include "sampa/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sampa/errors.hpp"

namespace sampa {

std::string_view to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::inverse_power: return "inverse-power";
    case ScheduleKind::theorem1: return "theorem1";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "inverse-power" || name == "inverse_power") return ScheduleKind::inverse_power;
  if (name == "theorem1") return ScheduleKind::theorem1;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

Schedule Schedule::constant(double eta0) {
  Schedule s;
  s.kind = ScheduleKind::constant;
  s.eta0 = eta0;
  return s;
}

Schedule Schedule::cosine(double eta0) {
  Schedule s;
  s.kind = ScheduleKind::cosine;
  s.eta0 = eta0;
  return s;
}

Schedule Schedule::inverse_power(double eta0, double power) {
  Schedule s;
  s.kind = ScheduleKind::inverse_power;
  s.eta0 = eta0;
  s.power = power;
  return s;
}

Schedule Schedule::theorem1(double delta0, double rho, double constant_c, double lipschitz, std::size_t T,
                            Theorem1Cap cap) {
  Schedule s;
  s.kind = ScheduleKind::theorem1;
  s.delta0 = delta0;
  s.rho = rho;
  s.smoothness_c = constant_c;
  s.lipschitz = lipschitz;
  s.formula_T = T;
  s.cap = cap;
  return s;
}

void Schedule::validate() const {
  switch (kind) {
    case ScheduleKind::constant:
    case ScheduleKind::cosine:
      if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("schedule: eta0 must be > 0");
      break;
    case ScheduleKind::inverse_power:
      if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("schedule: eta0 must be > 0");
      if (!(power >= 0.0) || !std::isfinite(power)) throw ConfigError("schedule: power must be >= 0");
      break;
    case ScheduleKind::theorem1:
      if (!(delta0 > 0.0)) throw ConfigError("schedule: theorem1 needs delta0 > 0");
      if (!(rho >= 0.0)) throw ConfigError("schedule: theorem1 needs rho >= 0");
      if (!(smoothness_c > 0.0)) throw ConfigError("schedule: theorem1 needs C > 0");
      if (!(lipschitz > 0.0)) throw ConfigError("schedule: theorem1 needs L > 0");
      if (formula_T == 0) throw ConfigError("schedule: theorem1 needs T >= 1");
      break;
  }
}

double schedule_eta(const Schedule& s, std::size_t t, std::size_t T) {
  if (T == 0) throw ConfigError("schedule: horizon T must be >= 1");
  if (t >= T) throw std::out_of_range("schedule: step " + std::to_string(t) + " outside horizon " + std::to_string(T));
  s.validate();
  const double td = static_cast<double>(t);
  switch (s.kind) {
    case ScheduleKind::constant:
      return s.eta0;
    case ScheduleKind::cosine:
      return 0.5 * s.eta0 * (1.0 + std::cos(std::numbers::pi * td / static_cast<double>(T)));
    case ScheduleKind::inverse_power:
      return s.eta0 / std::pow(1.0 + td, s.power);
    case ScheduleKind::theorem1: {
      const double tuned = std::sqrt(s.delta0) / (s.rho * std::sqrt(s.smoothness_c * static_cast<double>(s.formula_T)));
      const double half_inv_L = 1.0 / (2.0 * s.lipschitz);
      const double cap = s.cap == Theorem1Cap::printed ? std::max(half_inv_L, 1.0) : std::min(half_inv_L, 1.0);
      return std::min(tuned, cap);
    }
  }
  throw ConfigError("schedule: unknown kind");
}

}  // namespace sampa
