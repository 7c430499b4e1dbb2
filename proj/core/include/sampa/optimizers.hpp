#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string_view>

#include "sampa/problems.hpp"
#include "sampa/rng.hpp"
#include "sampa/vecmath.hpp"

namespace sampa {

enum class Method { sgd, sam, randsam, optsam, optgd, sampa_lambda };

std::string_view to_string(Method m) noexcept;
/// Accepts the enum spellings; "sampa" is an alias of "sampa_lambda".
Method parse_method(std::string_view name);

enum class BaseKind { sgd_momentum, adamw_like };

std::string_view to_string(BaseKind k) noexcept;
BaseKind parse_base_kind(std::string_view name);

/// Base optimizer consuming the final gradient of each update.
///
/// sgd_momentum: g' = g + wd x; v <- mu v + g'; x <- x - eta v   (coupled decay)
/// adamw_like:   m <- b1 m + (1-b1) g; s <- b2 s + (1-b2) g^2;
///               x <- x - eta (m_hat / (sqrt(s_hat) + eps) + wd x)  (decoupled)
struct BaseSpec {
  BaseKind kind = BaseKind::sgd_momentum;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  static BaseSpec plain_sgd() { return {}; }
  void validate() const;
};

struct OptimizerSpec {
  Method method = Method::sampa_lambda;
  double rho = 0.05;
  double lambda = 0.0;
  BaseSpec base;

  void validate() const;
};

/// Auxiliary per-parameter state of the base optimizer (the `m` of the
/// two-worker algorithm). Vectors are empty until first use.
struct BaseState {
  ParamVector velocity;
  ParamVector first_moment;
  ParamVector second_moment;
  std::uint64_t steps = 0;

  friend bool operator==(const BaseState&, const BaseState&) = default;
};

struct BaseUpdate {
  ParamVector x;
  BaseState state;
};

/// One base-optimizer step from (state, x) along g. With peek = true the
/// returned state equals `state` (read-only use, as needed for y_{t+1}).
BaseUpdate base_update(const BaseState& state, const ParamVector& x, const ParamVector& g, double eta,
                       const BaseSpec& base, bool peek = false);

/// Gradient evaluations per update: total work and the length of the longest
/// chain of evaluations that depend on each other.
struct GradCount {
  unsigned total = 0;
  unsigned sequential = 0;
  friend bool operator==(const GradCount&, const GradCount&) = default;
};

/// Per-method cost table (sgd 1/1, sam 2/2, randsam 1/1, optsam 1/1,
/// optgd 2/2, sampa_lambda 2/1).
GradCount grad_eval_count(Method m) noexcept;

/// Dependency tracking for gradient evaluations inside one update. Each
/// evaluation is recorded with the levels of the evaluations its input point
/// was derived from; values carried over from earlier updates have level 0.
class GradientTape {
 public:
  using Level = unsigned;
  static constexpr Level kCarried = 0;

  Level record(std::initializer_list<Level> inputs = {});
  GradCount count() const noexcept { return {total_, depth_}; }

 private:
  unsigned total_ = 0;
  unsigned depth_ = 0;
};

/// What one update computed. Vectors a method does not produce stay empty.
struct StepRecord {
  ParamVector perturbed;          ///< x~_t
  ParamVector perturbation_grad;  ///< gradient whose direction built x~_t
  ParamVector perturbed_grad;     ///< g~_t = grad f(x~_t, B_t)
  ParamVector auxiliary;          ///< y_{t+1}
  ParamVector next_grad;          ///< g_{t+1} = grad f(y_{t+1}, B_{t+1})
  ParamVector direction;          ///< final gradient handed to the base optimizer
  std::uint64_t batch_id = 0;       ///< B_t
  std::uint64_t next_batch_id = 0;  ///< B_{t+1} (methods that look ahead)
  GradCount cost;
};

template <typename State>
struct StepOutcome {
  State state;
  StepRecord record;
};

/// Iterate plus base-optimizer state; used by sgd, sam and randsam.
struct PlainState {
  ParamVector x;
  BaseState base;
};

PlainState make_plain_state(ParamVector x0);

StepOutcome<PlainState> sgd_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                 const ProblemOracle& oracle, const Batch& batch);

/// x~ = x + rho g/||g|| with g = grad f(x, B); x' = base(x, grad f(x~, B)).
StepOutcome<PlainState> sam_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                 const ProblemOracle& oracle, const Batch& batch);
/// Plain-SGD-base convenience form.
ParamVector sam_step(const ParamVector& x, double eta, double rho, const ProblemOracle& oracle, const Batch& batch);

/// x~ = x + rho e/||e|| with e ~ N(0, I) drawn from `rng`.
StepOutcome<PlainState> randsam_step(const PlainState& s, double eta, const OptimizerSpec& spec,
                                     const ProblemOracle& oracle, const Batch& batch, SeededRng& rng);

struct OptSamState {
  ParamVector x;
  ParamVector prev_perturbed_grad;  ///< grad f(x~_{t-1}); grad f(x0, B0) initially
  BaseState base;
};

/// Initializes the cached perturbed gradient with grad f(x0, B0) (one evaluation).
OptSamState optsam_init(ParamVector x0, const ProblemOracle& oracle, const Batch& b0);

StepOutcome<OptSamState> optsam_step(const OptSamState& s, double eta, const OptimizerSpec& spec,
                                     const ProblemOracle& oracle, const Batch& batch);

struct OptGdState {
  ParamVector x;
  ParamVector y;
  BaseState base;
};

OptGdState optgd_init(ParamVector x0);

/// y' = x - eta grad f(y, B); x' = x - eta grad f(y', B_next).
StepOutcome<OptGdState> optgd_step(const OptGdState& s, double eta, const OptimizerSpec& spec,
                                   const ProblemOracle& oracle, const Batch& batch, const Batch& next_batch);

struct SampaState {
  ParamVector x;
  ParamVector y;
  ParamVector g;  ///< cached grad f(y_t, B_t)
  std::uint64_t g_batch_id = 0;
  BaseState base;
  std::uint64_t t = 0;
};

/// y0 = x0, g0 = grad f(y0, B0) (one evaluation).
SampaState sampa_init(ParamVector x0, const ProblemOracle& oracle, const Batch& b0);

/// The pieces of one SAMPa-lambda update. sampa_step runs them in order;
/// the two-worker executor runs the first two on different workers.
namespace sampa_parts {

/// x~_t = x_t + rho g_t/||g_t||.
ParamVector perturbed_point(const SampaState& s, const OptimizerSpec& spec);
/// y_{t+1} from base_update(m_t, x_t, g_t, eta, peek = true).
ParamVector auxiliary_point(const SampaState& s, double eta, const OptimizerSpec& spec);
/// G_t = (1 - lambda) g~_t + lambda g_{t+1}, always in this operand order.
ParamVector final_gradient(double lambda, const ParamVector& perturbed_grad, const ParamVector& next_grad);
/// x_{t+1}, m_{t+1} from base_update(m_t, x_t, G_t, eta); caches g_{t+1}.
SampaState advance(const SampaState& s, double eta, const OptimizerSpec& spec, const ParamVector& direction,
                   ParamVector auxiliary, ParamVector next_grad, std::uint64_t next_batch_id);
/// Throws StateError unless s.g was computed on `batch` (and, when `audit`
/// is set, unless s.g equals grad f(y_t, B_t) bit for bit).
void check_cache(const SampaState& s, const ProblemOracle& oracle, const Batch& batch, bool audit);

}  // namespace sampa_parts

StepOutcome<SampaState> sampa_step(const SampaState& s, double eta, const OptimizerSpec& spec,
                                   const ProblemOracle& oracle, const Batch& batch, const Batch& next_batch,
                                   bool audit = false);

}  // namespace sampa
