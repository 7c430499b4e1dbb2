#include "sampa/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sampa/errors.hpp"

namespace sampa {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::sgd: return "sgd";
    case Method::sam: return "sam";
    case Method::randsam: return "randsam";
    case Method::optsam: return "optsam";
    case Method::optgd: return "optgd";
    case Method::sampa_lambda: return "sampa_lambda";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "sgd") return Method::sgd;
  if (name == "sam") return Method::sam;
  if (name == "randsam") return Method::randsam;
  if (name == "optsam") return Method::optsam;
  if (name == "optgd") return Method::optgd;
  if (name == "sampa_lambda" || name == "sampa") return Method::sampa_lambda;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(BaseKind k) noexcept {
  return k == BaseKind::sgd_momentum ? "sgd_momentum" : "adamw_like";
}

BaseKind parse_base_kind(std::string_view name) {
  if (name == "sgd_momentum" || name == "sgd") return BaseKind::sgd_momentum;
  if (name == "adamw_like" || name == "adamw") return BaseKind::adamw_like;
  throw ConfigError("unknown base optimizer '" + std::string(name) + "'");
}

void BaseSpec::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (kind == BaseKind::adamw_like) {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  }
}

void OptimizerSpec::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be >= 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  base.validate();
}

BaseUpdate base_update(const BaseState& state, const ParamVector& x, const ParamVector& g, double eta,
                       const BaseSpec& base, bool peek) {
  if (x.dim() != g.dim()) throw std::invalid_argument("base_update: x and g differ in dimension");
  const std::size_t d = x.dim();
  BaseUpdate out{x, state};

  switch (base.kind) {
    case BaseKind::sgd_momentum: {
      ParamVector v = state.velocity.empty() ? ParamVector(d, 0.0) : state.velocity;
      if (v.dim() != d) throw StateError("base_update: velocity has the wrong dimension");
      for (std::size_t i = 0; i < d; ++i) {
        const double decayed = g[i] + base.weight_decay * x[i];
        v[i] = base.momentum * v[i] + decayed;
        out.x[i] = x[i] - eta * v[i];
      }
      if (!peek) out.state.velocity = std::move(v);
      break;
    }
    case BaseKind::adamw_like: {
      ParamVector m = state.first_moment.empty() ? ParamVector(d, 0.0) : state.first_moment;
      ParamVector s = state.second_moment.empty() ? ParamVector(d, 0.0) : state.second_moment;
      if (m.dim() != d || s.dim() != d) throw StateError("base_update: moments have the wrong dimension");
      const double k = static_cast<double>(state.steps + 1);
      const double c1 = 1.0 - std::pow(base.beta1, k);
      const double c2 = 1.0 - std::pow(base.beta2, k);
      for (std::size_t i = 0; i < d; ++i) {
        m[i] = base.beta1 * m[i] + (1.0 - base.beta1) * g[i];
        s[i] = base.beta2 * s[i] + (1.0 - base.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double s_hat = s[i] / c2;
        out.x[i] = x[i] - eta * (m_hat / (std::sqrt(s_hat) + base.adam_eps) + base.weight_decay * x[i]);
      }
      if (!peek) {
        out.state.first_moment = std::move(m);
        out.state.second_moment = std::move(s);
      }
      break;
    }
  }
  if (!peek) ++out.state.steps;
  return out;
}

GradCount grad_eval_count(Method m) noexcept {
  switch (m) {
    case Method::sgd: return {1, 1};
    case Method::sam: return {2, 2};
    case Method::randsam: return {1, 1};
    case Method::optsam: return {1, 1};
    case Method::optgd: return {2, 2};
    case Method::sampa_lambda: return {2, 1};
  }
  return {};
}

GradientTape::Level GradientTape::record(std::initializer_list<Level> inputs) {
  Level level = 1;
  for (Level in : inputs) level = std::max(level, in + 1);
  ++total_;
  depth_ = std::max(depth_, level);
  return level;
}

namespace {

ParamVector perturb(const ParamVector& x, double rho, const ParamVector& direction_source) {
  ParamVector out = x;
  out.axpy(rho, unit_direction(direction_source));
  return out;
}

}  // namespace

PlainState make_plain_state(ParamVector x0) { return PlainState{std::move(x0), {}}; }

StepOutcome<PlainState> sgd_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                 const ProblemOracle& oracle, const Batch& batch) {
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.direction = oracle.gradient(s.x, batch);
  tape.record();
  auto upd = base_update(s.base, s.x, rec.direction, eta, spec.base);
  rec.cost = tape.count();
  return {PlainState{std::move(upd.x), std::move(upd.state)}, std::move(rec)};
}

StepOutcome<PlainState> sam_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                 const ProblemOracle& oracle, const Batch& batch) {
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.perturbation_grad = oracle.gradient(s.x, batch);
  const auto first = tape.record();
  rec.perturbed = perturb(s.x, spec.rho, rec.perturbation_grad);
  rec.perturbed_grad = oracle.gradient(rec.perturbed, batch);
  tape.record({first});
  rec.direction = rec.perturbed_grad;
  auto upd = base_update(s.base, s.x, rec.direction, eta, spec.base);
  rec.cost = tape.count();
  return {PlainState{std::move(upd.x), std::move(upd.state)}, std::move(rec)};
}

ParamVector sam_step(const ParamVector& x, double eta, double rho, const ProblemOracle& oracle, const Batch& batch) {
  OptimizerSpec spec;
  spec.method = Method::sam;
  spec.rho = rho;
  return sam_step(make_plain_state(x), eta, spec, oracle, batch).state.x;
}

StepOutcome<PlainState> randsam_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                     const ProblemOracle& oracle, const Batch& batch, SeededRng& rng) {
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.perturbation_grad = gaussian_vector(rng, s.x.dim());
  rec.perturbed = perturb(s.x, spec.rho, rec.perturbation_grad);
  rec.perturbed_grad = oracle.gradient(rec.perturbed, batch);
  tape.record();
  rec.direction = rec.perturbed_grad;
  auto upd = base_update(s.base, s.x, rec.direction, eta, spec.base);
  rec.cost = tape.count();
  return {PlainState{std::move(upd.x), std::move(upd.state)}, std::move(rec)};
}

OptSamState optsam_init(ParamVector x0, const ProblemOracle& oracle, const Batch& b0) {
  ParamVector g0 = oracle.gradient(x0, b0);
  return OptSamState{std::move(x0), std::move(g0), {}};
}

StepOutcome<OptSamState> optsam_step(const OptSamState& s, double eta, const OptimizerSpec& spec,
                                     const ProblemOracle& oracle, const Batch& batch) {
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.perturbation_grad = s.prev_perturbed_grad;
  rec.perturbed = perturb(s.x, spec.rho, rec.perturbation_grad);
  rec.perturbed_grad = oracle.gradient(rec.perturbed, batch);
  tape.record({GradientTape::kCarried});
  rec.direction = rec.perturbed_grad;
  auto upd = base_update(s.base, s.x, rec.direction, eta, spec.base);
  rec.cost = tape.count();
  OptSamState next{std::move(upd.x), rec.perturbed_grad, std::move(upd.state)};
  return {std::move(next), std::move(rec)};
}

OptGdState optgd_init(ParamVector x0) {
  ParamVector y0 = x0;
  return OptGdState{std::move(x0), std::move(y0), {}};
}

StepOutcome<OptGdState> optgd_step(const OptGdState& s, double eta, const OptimizerSpec& spec,
                                   const ProblemOracle& oracle, const Batch& batch, const Batch& next_batch) {
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.next_batch_id = next_batch.id();
  rec.perturbation_grad = oracle.gradient(s.y, batch);
  const auto first = tape.record();
  rec.auxiliary = base_update(s.base, s.x, rec.perturbation_grad, eta, spec.base, /*peek=*/true).x;
  rec.next_grad = oracle.gradient(rec.auxiliary, next_batch);
  tape.record({first});
  rec.direction = rec.next_grad;
  auto upd = base_update(s.base, s.x, rec.direction, eta, spec.base);
  rec.cost = tape.count();
  OptGdState next{std::move(upd.x), rec.auxiliary, std::move(upd.state)};
  return {std::move(next), std::move(rec)};
}

SampaState sampa_init(ParamVector x0, const ProblemOracle& oracle, const Batch& b0) {
  SampaState s;
  s.y = x0;
  s.g = oracle.gradient(s.y, b0);
  s.g_batch_id = b0.id();
  s.x = std::move(x0);
  return s;
}

namespace sampa_parts {

ParamVector perturbed_point(const SampaState& s, const OptimizerSpec& spec) { return perturb(s.x, spec.rho, s.g); }

ParamVector auxiliary_point(const SampaState& s, double eta, const OptimizerSpec& spec) {
  return base_update(s.base, s.x, s.g, eta, spec.base, /*peek=*/true).x;
}

ParamVector final_gradient(double lambda, const ParamVector& perturbed_grad, const ParamVector& next_grad) {
  return linear_combination(1.0 - lambda, perturbed_grad, lambda, next_grad);
}

SampaState advance(const SampaState& s, double eta, const OptimizerSpec& spec, const ParamVector& direction,
                   ParamVector auxiliary, ParamVector next_grad, std::uint64_t next_batch_id) {
  auto upd = base_update(s.base, s.x, direction, eta, spec.base);
  SampaState next;
  next.x = std::move(upd.x);
  next.y = std::move(auxiliary);
  next.g = std::move(next_grad);
  next.g_batch_id = next_batch_id;
  next.base = std::move(upd.state);
  next.t = s.t + 1;
  return next;
}

void check_cache(const SampaState& s, const ProblemOracle& oracle, const Batch& batch, bool audit) {
  if (s.g_batch_id != batch.id()) {
    throw StateError("sampa: cached gradient was computed on batch " + std::to_string(s.g_batch_id) +
                     " but step " + std::to_string(s.t) + " perturbs on batch " + std::to_string(batch.id()));
  }
  if (audit && !(oracle.gradient(s.y, batch) == s.g)) {
    throw StateError("sampa: cached gradient differs from grad f(y_t, B_t) at step " + std::to_string(s.t));
  }
}

}  // namespace sampa_parts

StepOutcome<SampaState> sampa_step(const SampaState& s, double eta, const OptimizerSpec& spec,
                                   const ProblemOracle& oracle, const Batch& batch, const Batch& next_batch,
                                   bool audit) {
  sampa_parts::check_cache(s, oracle, batch, audit);
  GradientTape tape;
  StepRecord rec;
  rec.batch_id = batch.id();
  rec.next_batch_id = next_batch.id();
  rec.perturbation_grad = s.g;
  rec.perturbed = sampa_parts::perturbed_point(s, spec);
  rec.auxiliary = sampa_parts::auxiliary_point(s, eta, spec);
  // Fixed order: g~_t first, then g_{t+1}. Neither input depends on the other.
  rec.perturbed_grad = oracle.gradient(rec.perturbed, batch);
  tape.record({GradientTape::kCarried});
  rec.next_grad = oracle.gradient(rec.auxiliary, next_batch);
  tape.record({GradientTape::kCarried});
  rec.direction = sampa_parts::final_gradient(spec.lambda, rec.perturbed_grad, rec.next_grad);
  rec.cost = tape.count();
  SampaState next = sampa_parts::advance(s, eta, spec, rec.direction, rec.auxiliary, rec.next_grad, next_batch.id());
  return {std::move(next), std::move(rec)};
}

}  // namespace sampa
