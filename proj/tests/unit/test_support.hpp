#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "sampa/problems.hpp"
#include "sampa/rng.hpp"

namespace sampa::testing {

/// max_i |fd_i - g_i| / max(||g||_inf, ||fd||_inf) with central differences.
inline double fd_relative_error(const ProblemOracle& oracle, const ParamVector& x, const Batch& batch, double h) {
  const ParamVector g = oracle.gradient(x, batch);
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    ParamVector xp = x;
    ParamVector xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (oracle.value(xp, batch) - oracle.value(xm, batch)) / (2.0 * h);
    err = std::max(err, std::abs(fd - g[i]));
    scale = std::max({scale, std::abs(fd), std::abs(g[i])});
  }
  return scale > 0.0 ? err / scale : err;
}

/// Forwards to another oracle; counts gradient calls and can fail or stall
/// on a chosen call.
class InstrumentedOracle final : public ProblemOracle {
 public:
  explicit InstrumentedOracle(std::shared_ptr<const ProblemOracle> inner) : inner_(std::move(inner)) {}

  std::string_view name() const noexcept override { return inner_->name(); }
  std::size_t dim() const noexcept override { return inner_->dim(); }
  std::size_t n_samples() const noexcept override { return inner_->n_samples(); }
  double value(const ParamVector& x, const Batch& b) const override { return inner_->value(x, b); }
  ParamVector gradient(const ParamVector& x, const Batch& b) const override {
    const long call = ++calls_;
    if (call == throw_on_) throw std::runtime_error("injected failure");
    if (call == stall_on_) std::this_thread::sleep_for(stall_);
    return inner_->gradient(x, b);
  }
  std::optional<double> lipschitz() const noexcept override { return inner_->lipschitz(); }
  bool is_convex() const noexcept override { return inner_->is_convex(); }
  std::optional<double> infimum() const override { return inner_->infimum(); }
  ParamVector initial_point(std::uint64_t seed) const override { return inner_->initial_point(seed); }

  long calls() const noexcept { return calls_; }
  void reset() noexcept { calls_ = 0; }
  void throw_on_call(long n) noexcept { throw_on_ = n; }
  void stall_on_call(long n, std::chrono::milliseconds d) noexcept {
    stall_on_ = n;
    stall_ = d;
  }

 private:
  std::shared_ptr<const ProblemOracle> inner_;
  mutable std::atomic<long> calls_{0};
  long throw_on_ = -1;
  long stall_on_ = -1;
  std::chrono::milliseconds stall_{0};
};

inline ParamVector random_point(SeededRng& rng, std::size_t dim, double scale = 1.0) {
  ParamVector x = gaussian_vector(rng, dim);
  x *= scale;
  return x;
}

}  // namespace sampa::testing
