#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sampa/dataset.hpp"
#include "sampa/rng.hpp"
#include "sampa/vecmath.hpp"

namespace sampa {

/// Immutable set of sample indices with a monotone id. Copies share storage.
class Batch {
 public:
  static constexpr std::uint64_t kFullBatchId = std::numeric_limits<std::uint64_t>::max();

  Batch(std::uint64_t id, std::vector<std::size_t> indices);

  /// All samples 0..n-1 in order, with id kFullBatchId.
  static Batch full(std::size_t n_samples);

  std::uint64_t id() const noexcept { return id_; }
  std::span<const std::size_t> indices() const noexcept { return *indices_; }
  std::size_t size() const noexcept { return indices_->size(); }

  friend bool operator==(const Batch& a, const Batch& b) {
    return a.id_ == b.id_ && *a.indices_ == *b.indices_;
  }

 private:
  std::uint64_t id_;
  std::shared_ptr<const std::vector<std::size_t>> indices_;
};

/// Differentiable objective with minibatch semantics: value and gradient on
/// a batch are the mean of per-sample terms over the batch (plus any
/// regularizer). Implementations are read-only after construction and safe
/// to evaluate from several threads at once.
class ProblemOracle {
 public:
  virtual ~ProblemOracle() = default;

  virtual std::string_view name() const noexcept = 0;
  virtual std::size_t dim() const noexcept = 0;
  /// 1 for deterministic objectives.
  virtual std::size_t n_samples() const noexcept = 0;

  virtual double value(const ParamVector& x, const Batch& batch) const = 0;
  virtual ParamVector gradient(const ParamVector& x, const Batch& batch) const = 0;

  /// Global Lipschitz constant of the gradient; empty when it is only
  /// estimated along runs (see estimate_local_smoothness).
  virtual std::optional<double> lipschitz() const noexcept = 0;
  virtual bool is_convex() const noexcept = 0;
  /// inf_x f(x) when it is known (closed form or certified reference solve).
  virtual std::optional<double> infimum() const { return std::nullopt; }
  /// Seeded starting point for runs.
  virtual ParamVector initial_point(std::uint64_t seed) const;

  double full_value(const ParamVector& x) const { return value(x, full_batch()); }
  ParamVector full_gradient(const ParamVector& x) const { return gradient(x, full_batch()); }
  const Batch& full_batch() const;

 protected:
  /// Throws std::invalid_argument on shape mismatch or out-of-range indices,
  /// NumericError on non-finite x.
  void check_args(const ParamVector& x, const Batch& batch) const;

 private:
  mutable std::once_flag full_once_;
  mutable std::shared_ptr<const Batch> full_batch_;
};

using OraclePtr = std::shared_ptr<const ProblemOracle>;

/// f(x) = ||x||^2, gradient 2x, L = 2.
class ToyQuadratic final : public ProblemOracle {
 public:
  explicit ToyQuadratic(std::size_t dim);

  std::string_view name() const noexcept override { return "toy_quadratic"; }
  std::size_t dim() const noexcept override { return dim_; }
  std::size_t n_samples() const noexcept override { return 1; }
  double value(const ParamVector& x, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const Batch& batch) const override;
  std::optional<double> lipschitz() const noexcept override { return 2.0; }
  bool is_convex() const noexcept override { return true; }
  std::optional<double> infimum() const override { return 0.0; }

 private:
  std::size_t dim_;
};

/// f(x) = 1/2 x^T A x - b^T x for symmetric PSD A. L = lambda_max(A) by
/// power iteration.
class PsdQuadratic final : public ProblemOracle {
 public:
  /// Throws ConfigError when A is not square, not symmetric, or b has the
  /// wrong size.
  PsdQuadratic(DenseMatrix a, ParamVector b);

  std::string_view name() const noexcept override { return "psd_quadratic"; }
  std::size_t dim() const noexcept override { return b_.dim(); }
  std::size_t n_samples() const noexcept override { return 1; }
  double value(const ParamVector& x, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const Batch& batch) const override;
  std::optional<double> lipschitz() const noexcept override { return lipschitz_; }
  bool is_convex() const noexcept override { return true; }
  /// Closed-form minimum when A is positive definite.
  std::optional<double> infimum() const override;
  std::optional<ParamVector> minimizer() const { return minimizer_; }

  const DenseMatrix& matrix() const noexcept { return a_; }
  const ParamVector& linear_term() const noexcept { return b_; }

 private:
  DenseMatrix a_;
  ParamVector b_;
  double lipschitz_;
  std::optional<ParamVector> minimizer_;
};

/// Random A = Q diag(eigs) Q^T with eigenvalues in [min_eig, lipschitz], the
/// top one pinned to `lipschitz`, and b ~ N(0, I).
std::shared_ptr<const PsdQuadratic> make_random_psd_quadratic(std::size_t dim, double lipschitz,
                                                              double min_eig, std::uint64_t seed);

/// Exactly floor(flip_fraction * n) labels are flipped.
struct LabelNoiseSpec {
  double flip_fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Binary logistic regression without intercept, labels in {0, 1}:
/// f(x) = mean_i log(1 + exp(-s_i <a_i, x>)) + (ridge/2)||x||^2, s_i = 2y_i - 1.
class LogisticRegression final : public ProblemOracle {
 public:
  static constexpr double kDefaultRidge = 1e-3;

  explicit LogisticRegression(Dataset data, double ridge = kDefaultRidge,
                              std::vector<double> clean_labels = {});

  std::string_view name() const noexcept override { return "logistic_regression"; }
  std::size_t dim() const noexcept override { return data_.dim(); }
  std::size_t n_samples() const noexcept override { return data_.size(); }
  double value(const ParamVector& x, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const Batch& batch) const override;
  /// ||X||_2^2 / (4n) + ridge.
  std::optional<double> lipschitz() const noexcept override { return lipschitz_; }
  bool is_convex() const noexcept override { return true; }
  /// Minimum found by a damped Newton solve to ||grad|| <= 1e-10.
  std::optional<double> infimum() const override { return infimum_; }
  ParamVector initial_point(std::uint64_t seed) const override;

  const Dataset& dataset() const noexcept { return data_; }
  double ridge() const noexcept { return ridge_; }
  /// Labels before noise injection (equal to dataset labels when clean).
  const std::vector<double>& clean_labels() const noexcept { return clean_labels_; }
  std::size_t flipped_count() const noexcept;
  const ParamVector& reference_minimizer() const noexcept { return minimizer_; }

 private:
  Dataset data_;
  double ridge_;
  std::vector<double> clean_labels_;
  double lipschitz_;
  ParamVector minimizer_;
  double infimum_;
};

/// Two Gaussian blobs (means +/- a random unit direction times 1.5, unit
/// variance), labels drawn uniformly, optional label flipping.
std::shared_ptr<const LogisticRegression> make_logistic_regression(
    std::size_t n, std::size_t dim, std::uint64_t seed, std::optional<LabelNoiseSpec> noise = std::nullopt);

/// One-hidden-layer tanh network with scalar output and squared loss
/// 1/2 (yhat - y)^2. Parameters are laid out as [W1 (hidden x d_in, row
/// major), b1 (hidden), w2 (hidden), b2].
class TinyMlp final : public ProblemOracle {
 public:
  TinyMlp(Dataset data, std::size_t hidden);

  std::string_view name() const noexcept override { return "tiny_mlp"; }
  std::size_t dim() const noexcept override { return hidden_ * (data_.dim() + 2) + 1; }
  std::size_t n_samples() const noexcept override { return data_.size(); }
  double value(const ParamVector& x, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const Batch& batch) const override;
  std::optional<double> lipschitz() const noexcept override { return std::nullopt; }
  bool is_convex() const noexcept override { return false; }
  ParamVector initial_point(std::uint64_t seed) const override;

  std::size_t hidden() const noexcept { return hidden_; }
  const Dataset& dataset() const noexcept { return data_; }

 private:
  Dataset data_;
  std::size_t hidden_;
};

/// Regression data from a random tanh teacher network plus N(0, 0.1^2) noise.
std::shared_ptr<const TinyMlp> make_tiny_mlp(std::size_t n, std::size_t dim_in, std::size_t hidden,
                                             std::uint64_t seed);

/// Largest observed ||grad f(x + h u) - grad f(x)|| / h over `probes` random
/// unit directions u (full batch). A local curvature estimate, not a bound.
double estimate_local_smoothness(const ProblemOracle& oracle, const ParamVector& x, SeededRng rng,
                                 std::size_t probes = 8, double h = 1e-4);

/// Epoch-reshuffled minibatch stream. Batch k is a pure function of
/// (seed, k): epoch e = k / per_epoch uses permutation split(e), and the
/// trailing n % batch_size samples of each epoch are dropped. When
/// batch_size == n every batch is the ordered full index set.
class BatchSampler {
 public:
  /// Throws ConfigError unless 1 <= batch_size <= n_samples.
  BatchSampler(std::size_t n_samples, std::size_t batch_size, SeededRng rng);

  Batch batch_at(std::uint64_t counter) const;
  Batch next() { return batch_at(counter_++); }

  std::uint64_t counter() const noexcept { return counter_; }
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t batches_per_epoch() const noexcept { return n_samples_ / batch_size_; }

 private:
  std::size_t n_samples_;
  std::size_t batch_size_;
  SeededRng rng_;
  std::uint64_t counter_ = 0;
  mutable std::uint64_t cached_epoch_ = std::numeric_limits<std::uint64_t>::max();
  mutable std::vector<std::size_t> cached_perm_;
};

/// Batch number `counter` of the stream BatchSampler(oracle.n_samples(),
/// batch_size, rng) would produce.
Batch sample_next_batch(const ProblemOracle& oracle, const SeededRng& rng, std::size_t batch_size,
                        std::uint64_t counter);

}  // namespace sampa
