#include "sampa/pipeline.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

#include "sampa/errors.hpp"
#include "sampa/format.hpp"

namespace sampa {
namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kPerturbStream = 0x9E27;

std::string describe(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown exception";
  }
}

/// Everything a run derives from (oracle, config) before the first step.
struct RunSetup {
  ParamVector x0;
  BatchSampler sampler;
  SeededRng perturb_rng;
  IterateTrace trace;

  RunSetup(const ProblemOracle& oracle, const RunConfig& config, bool parallel)
      : x0(config.x0 ? *config.x0 : oracle.initial_point(config.seed)),
        sampler(oracle.n_samples(), config.effective_batch_size(oracle), SeededRng(config.seed).split(kBatchStream)),
        perturb_rng(SeededRng(config.seed).split(kPerturbStream)) {
    trace.meta.problem = std::string(oracle.name());
    trace.meta.spec = config.spec;
    trace.meta.schedule = config.schedule;
    trace.meta.T = config.T;
    trace.meta.batch_size = config.effective_batch_size(oracle);
    trace.meta.n_samples = oracle.n_samples();
    trace.meta.seed = config.seed;
    trace.meta.parallel = parallel;
    trace.step_costs.reserve(config.T);
  }
};

double eta_after_last(const RunConfig& config) {
  if (!config.schedule.horizon_free()) return std::numeric_limits<double>::quiet_NaN();
  return schedule_eta(config.schedule, config.T, config.T + 1);
}

/// Row for x_t with full-batch measurements; step data is filled later.
TraceRow measure_row(const ProblemOracle& oracle, const RunConfig& config, std::size_t t, double eta,
                     const ParamVector& x, const ParamVector* y, std::uint64_t total, std::uint64_t seq) {
  TraceRow row;
  row.t = t;
  row.eta = eta;
  row.f = oracle.full_value(x);
  row.grad_norm = norm(oracle.full_gradient(x));
  row.total_grads_cum = total;
  row.seq_grads_cum = seq;
  if (config.keep_iterates) {
    row.x = x;
    if (y != nullptr) row.y = *y;
  }
  return row;
}

void fill_step(TraceRow& row, const RunConfig& config, const StepRecord& rec, bool has_lookahead) {
  row.batch_id_t = rec.batch_id;
  if (has_lookahead) row.batch_id_t1 = rec.next_batch_id;
  if (config.keep_iterates) {
    row.g = rec.perturbation_grad;
    row.g_tilde = rec.perturbed_grad;
    row.direction = rec.direction;
  }
}

bool should_record(const RunConfig& config, std::size_t t) { return t % config.record_every == 0; }

// ---------------------------------------------------------------------------
// two-worker plumbing

template <typename T>
class Channel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  /// Blocks until a value arrives or the channel is closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    T v = std::move(queue_.front());
    queue_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> queue_;
  bool closed_ = false;
};

/// Reusable two-party barrier with a timeout. Once a wait times out the
/// barrier is broken and every later arrival throws.
class BrokenBarrier : public PipelineError {
 public:
  BrokenBarrier() : PipelineError("exchange barrier is broken") {}
};

class ExchangeBarrier {
 public:
  explicit ExchangeBarrier(std::size_t parties) : parties_(parties) {}

  void arrive_and_wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (broken_) throw BrokenBarrier();
    const std::uint64_t gen = generation_;
    if (++arrived_ == parties_) {
      arrived_ = 0;
      ++generation_;
      ++completions_;
      cv_.notify_all();
      return;
    }
    if (!cv_.wait_for(lock, timeout, [&] { return generation_ != gen || broken_; })) {
      broken_ = true;
      cv_.notify_all();
      throw PipelineError("exchange barrier timed out after " + std::to_string(timeout.count()) + " ms");
    }
    if (generation_ == gen) throw BrokenBarrier();
  }

  std::size_t completions() const {
    std::lock_guard lock(mu_);
    return completions_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t parties_;
  std::size_t arrived_ = 0;
  std::uint64_t generation_ = 0;
  std::size_t completions_ = 0;
  bool broken_ = false;
};

enum class Role { perturbation = 0, lookahead = 1 };

struct StepOrder {
  std::size_t t = 0;
  double eta = 0.0;
  Batch batch;
  Batch next_batch;
};

/// Values exchanged at the barrier of step t, double-buffered by t % 2.
struct ExchangeSlot {
  ParamVector perturbed;
  ParamVector perturbed_grad;
  ParamVector auxiliary;
  ParamVector next_grad;
  bool failed[2] = {false, false};
};

struct WorkerReport {
  std::size_t t = 0;
  Role role = Role::perturbation;
  unsigned evals = 0;
  std::exception_ptr error;
  /// The error only reflects the peer's failure (broken barrier, failed flag).
  bool secondary = false;
  SampaState state;  ///< state after the step
  StepRecord record;  ///< perturbation worker only
};

struct Exchange {
  ExchangeBarrier barrier{2};
  ExchangeSlot slots[2];
  Channel<StepOrder> orders[2];
  Channel<WorkerReport> reports;
};

void worker_loop(Role role, SampaState state, const ProblemOracle& oracle, const RunConfig& config,
                 Exchange& ex) {
  const auto me = static_cast<std::size_t>(role);
  const std::size_t peer = 1 - me;
  const OptimizerSpec& spec = config.spec;
  while (auto order = ex.orders[me].pop()) {
    WorkerReport rep;
    rep.t = order->t;
    rep.role = role;
    ExchangeSlot& slot = ex.slots[order->t % 2];
    slot.failed[me] = false;
    try {
      if (role == Role::perturbation) {
        sampa_parts::check_cache(state, oracle, order->batch, config.audit);
        slot.perturbed = sampa_parts::perturbed_point(state, spec);
        slot.perturbed_grad = oracle.gradient(slot.perturbed, order->batch);
      } else {
        slot.auxiliary = sampa_parts::auxiliary_point(state, order->eta, spec);
        slot.next_grad = oracle.gradient(slot.auxiliary, order->next_batch);
      }
      rep.evals = 1;
    } catch (...) {
      rep.error = std::current_exception();
      slot.failed[me] = true;
    }

    try {
      ex.barrier.arrive_and_wait(config.barrier_timeout);
    } catch (const BrokenBarrier&) {
      if (!rep.error) {
        rep.error = std::current_exception();
        rep.secondary = true;
      }
      ex.reports.push(std::move(rep));
      return;
    } catch (...) {
      if (!rep.error) rep.error = std::current_exception();
      ex.reports.push(std::move(rep));
      return;
    }
    if (rep.error || slot.failed[peer]) {
      if (!rep.error) {
        rep.error = std::make_exception_ptr(PipelineError("peer worker failed"));
        rep.secondary = true;
      }
      ex.reports.push(std::move(rep));
      return;
    }

    try {
      ParamVector direction = sampa_parts::final_gradient(spec.lambda, slot.perturbed_grad, slot.next_grad);
      if (role == Role::perturbation) {
        rep.record.batch_id = order->batch.id();
        rep.record.next_batch_id = order->next_batch.id();
        rep.record.perturbation_grad = state.g;
        rep.record.perturbed = slot.perturbed;
        rep.record.perturbed_grad = slot.perturbed_grad;
        rep.record.auxiliary = slot.auxiliary;
        rep.record.next_grad = slot.next_grad;
        rep.record.direction = direction;
      }
      state = sampa_parts::advance(state, order->eta, spec, direction, slot.auxiliary, slot.next_grad,
                                   order->next_batch.id());
      rep.state = state;
    } catch (...) {
      rep.error = std::current_exception();
      ex.reports.push(std::move(rep));
      return;
    }
    ex.reports.push(std::move(rep));
  }
}

}  // namespace

void RunConfig::validate(const ProblemOracle& oracle) const {
  if (T < 1) throw ConfigError("T must be >= 1");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  spec.validate();
  schedule.validate();
  const std::size_t bs = effective_batch_size(oracle);
  if (bs < 1 || bs > oracle.n_samples()) {
    throw ConfigError("batch_size must be in [1, " + std::to_string(oracle.n_samples()) + "]");
  }
  if (x0 && x0->dim() != oracle.dim()) throw ConfigError("x0 has the wrong dimension");
  if (x0 && !x0->all_finite()) throw ConfigError("x0 has non-finite entries");
  if (barrier_timeout.count() <= 0) throw ConfigError("barrier_timeout must be positive");
}

IterateTrace run_serial(const ProblemOracle& oracle, const RunConfig& config) {
  config.validate(oracle);
  RunSetup setup(oracle, config, /*parallel=*/false);
  IterateTrace& trace = setup.trace;
  const OptimizerSpec& spec = config.spec;
  const Method method = spec.method;
  const bool lookahead = method == Method::optgd || method == Method::sampa_lambda;

  Batch current = setup.sampler.next();
  std::variant<PlainState, OptSamState, OptGdState, SampaState> state;
  try {
    switch (method) {
      case Method::sgd:
      case Method::sam:
      case Method::randsam:
        state = make_plain_state(setup.x0);
        break;
      case Method::optsam:
        state = optsam_init(setup.x0, oracle, current);
        trace.meta.init_cost = {1, 1};
        break;
      case Method::optgd:
        state = optgd_init(setup.x0);
        break;
      case Method::sampa_lambda:
        state = sampa_init(setup.x0, oracle, current);
        trace.meta.init_cost = {1, 1};
        break;
    }
  } catch (const std::exception& e) {
    throw StepFailure(0, std::string("initialization: ") + e.what());
  }

  auto current_x = [&]() -> const ParamVector& {
    return std::visit([](const auto& s) -> const ParamVector& { return s.x; }, state);
  };
  auto current_y = [&]() -> const ParamVector* {
    if (auto* s = std::get_if<SampaState>(&state)) return &s->y;
    if (auto* s = std::get_if<OptGdState>(&state)) return &s->y;
    return nullptr;
  };

  std::uint64_t total = trace.meta.init_cost.total;
  std::uint64_t seq = trace.meta.init_cost.sequential;
  for (std::size_t t = 0; t < config.T; ++t) {
    const double eta = schedule_eta(config.schedule, t, config.T);
    Batch next = setup.sampler.next();
    std::optional<TraceRow> row;
    StepRecord rec;
    try {
      if (should_record(config, t)) {
        row = measure_row(oracle, config, t, eta, current_x(), current_y(), total, seq);
      }
      switch (method) {
        case Method::sgd: {
          auto out = sgd_step(std::get<PlainState>(state), eta, spec, oracle, current);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
        case Method::sam: {
          auto out = sam_step(std::get<PlainState>(state), eta, spec, oracle, current);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
        case Method::randsam: {
          SeededRng step_rng = setup.perturb_rng.split(t);
          auto out = randsam_step(std::get<PlainState>(state), eta, spec, oracle, current, step_rng);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
        case Method::optsam: {
          auto out = optsam_step(std::get<OptSamState>(state), eta, spec, oracle, current);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
        case Method::optgd: {
          auto out = optgd_step(std::get<OptGdState>(state), eta, spec, oracle, current, next);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
        case Method::sampa_lambda: {
          auto out = sampa_step(std::get<SampaState>(state), eta, spec, oracle, current, next, config.audit);
          state = std::move(out.state);
          rec = std::move(out.record);
          break;
        }
      }
      if (!current_x().all_finite()) throw NumericError("iterate became non-finite");
    } catch (const std::exception& e) {
      throw StepFailure(t, e.what());
    }
    if (row) {
      fill_step(*row, config, rec, lookahead);
      trace.rows.push_back(std::move(*row));
    }
    trace.step_costs.push_back(rec.cost);
    total += rec.cost.total;
    seq += rec.cost.sequential;
    current = std::move(next);
  }
  trace.rows.push_back(
      measure_row(oracle, config, config.T, eta_after_last(config), current_x(), current_y(), total, seq));
  trace.final_x = current_x();
  return trace;
}

IterateTrace run_parallel_two_workers(const ProblemOracle& oracle, const RunConfig& config) {
  if (config.spec.method != Method::sampa_lambda) {
    throw ConfigError("two-worker execution is only defined for sampa_lambda, got " +
                      std::string(to_string(config.spec.method)));
  }
  config.validate(oracle);
  RunSetup setup(oracle, config, /*parallel=*/true);
  IterateTrace& trace = setup.trace;

  Batch current = setup.sampler.next();
  SampaState state;
  try {
    state = sampa_init(setup.x0, oracle, current);
  } catch (const std::exception& e) {
    throw StepFailure(0, std::string("initialization: ") + e.what());
  }
  trace.meta.init_cost = {1, 1};

  Exchange ex;
  std::jthread perturbation_worker(worker_loop, Role::perturbation, state, std::cref(oracle), std::cref(config),
                                   std::ref(ex));
  std::jthread lookahead_worker(worker_loop, Role::lookahead, state, std::cref(oracle), std::cref(config),
                                std::ref(ex));
  auto shutdown = [&] {
    ex.orders[0].close();
    ex.orders[1].close();
    perturbation_worker.join();
    lookahead_worker.join();
  };

  std::uint64_t total = trace.meta.init_cost.total;
  std::uint64_t seq = trace.meta.init_cost.sequential;
  for (std::size_t t = 0; t < config.T; ++t) {
    const double eta = schedule_eta(config.schedule, t, config.T);
    Batch next = setup.sampler.next();
    std::optional<TraceRow> row;
    try {
      if (should_record(config, t)) row = measure_row(oracle, config, t, eta, state.x, &state.y, total, seq);
    } catch (const std::exception& e) {
      shutdown();
      throw StepFailure(t, e.what());
    }

    ex.orders[0].push(StepOrder{t, eta, current, next});
    ex.orders[1].push(StepOrder{t, eta, current, next});
    std::optional<WorkerReport> reports[2];
    for (int k = 0; k < 2; ++k) {
      auto rep = ex.reports.pop();
      reports[static_cast<std::size_t>(rep->role)] = std::move(rep);
    }
    auto& a = *reports[0];
    auto& b = *reports[1];
    if (a.error || b.error) {
      const bool use_a = a.error && (!b.error || !a.secondary || b.secondary);
      const std::string msg = describe(use_a ? a.error : b.error);
      shutdown();
      throw StepFailure(t, "two-worker pipeline: " + msg);
    }
    if (!(a.state.x == b.state.x) || !(a.state.g == b.state.g)) {
      shutdown();
      throw StepFailure(t, "two-worker pipeline: workers disagree on x_{t+1}");
    }
    if (!a.state.x.all_finite()) {
      shutdown();
      throw StepFailure(t, "iterate became non-finite");
    }
    a.record.cost = GradCount{a.evals + b.evals, std::max(a.evals, b.evals)};
    if (row) {
      fill_step(*row, config, a.record, /*has_lookahead=*/true);
      trace.rows.push_back(std::move(*row));
    }
    trace.step_costs.push_back(a.record.cost);
    total += a.record.cost.total;
    seq += a.record.cost.sequential;
    state = std::move(a.state);
    current = std::move(next);
  }
  shutdown();
  trace.barrier_count = ex.barrier.completions();
  trace.rows.push_back(measure_row(oracle, config, config.T, eta_after_last(config), state.x, &state.y, total, seq));
  trace.final_x = state.x;
  return trace;
}

void TimingModel::validate() const {
  if (!(t_grad >= 0.0) || !(t_comm >= 0.0) || !(t_update >= 0.0)) {
    throw ConfigError("timing model costs must be >= 0");
  }
}

SpeedupEstimate speedup_vs_sam(const TimingModel& model) {
  model.validate();
  if (model.t_grad == 0.0) return {1.0, true};
  return {(2.0 * model.t_grad + model.t_update) / (model.t_grad + model.t_comm + model.t_update), false};
}

WallClock simulate_wall_clock(const IterateTrace& trace, const TimingModel& model, Method method) {
  model.validate();
  WallClock clock;
  clock.speedup = speedup_vs_sam(model);
  clock.per_step.reserve(trace.step_costs.size());
  clock.cumulative.reserve(trace.step_costs.size());
  const double comm = method == Method::sampa_lambda ? model.t_comm : 0.0;
  for (const GradCount& c : trace.step_costs) {
    const double dt = static_cast<double>(c.sequential) * model.t_grad + comm + model.t_update;
    clock.per_step.push_back(dt);
    clock.total += dt;
    clock.cumulative.push_back(clock.total);
  }
  return clock;
}

void annotate_sim_time(IterateTrace& trace, const WallClock& clock) {
  for (TraceRow& row : trace.rows) {
    row.sim_time_cum = row.t == 0 ? 0.0 : clock.cumulative.at(row.t - 1);
  }
}

namespace {

template <typename T>
std::string opt_field(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

}  // namespace

void write_trace_csv(std::ostream& out, const IterateTrace& trace) {
  out << "t,f,grad_norm,seq_grads_cum,total_grads_cum,sim_time_cum,batch_id_t,batch_id_t1,cos_xy,dist_xy\n";
  for (const TraceRow& r : trace.rows) {
    out << r.t << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ',' << r.seq_grads_cum << ','
        << r.total_grads_cum << ',' << format_double(r.sim_time_cum) << ',' << opt_field(r.batch_id_t) << ','
        << opt_field(r.batch_id_t1) << ',' << opt_field(r.cos_xy) << ',' << opt_field(r.dist_xy) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const IterateTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_trace_csv(out, trace);
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& why) {
    throw ConfigError("trace csv line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) fail("expected 10 columns");
    TraceRow r;
    auto num = [&](const std::string& s) {
      double v = 0.0;
      if (!parse_double(s, v)) fail("bad number '" + s + "'");
      return v;
    };
    auto uint = [&](const std::string& s) {
      try {
        return static_cast<std::uint64_t>(std::stoull(s));
      } catch (const std::exception&) {
        fail("bad integer '" + s + "'");
      }
      return std::uint64_t{0};
    };
    r.t = static_cast<std::size_t>(uint(cells[0]));
    r.f = num(cells[1]);
    r.grad_norm = num(cells[2]);
    r.seq_grads_cum = uint(cells[3]);
    r.total_grads_cum = uint(cells[4]);
    r.sim_time_cum = num(cells[5]);
    if (!cells[6].empty()) r.batch_id_t = uint(cells[6]);
    if (!cells[7].empty()) r.batch_id_t1 = uint(cells[7]);
    if (!cells[8].empty()) r.cos_xy = num(cells[8]);
    if (!cells[9].empty()) r.dist_xy = num(cells[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_trace_csv(in);
}

}  // namespace sampa
