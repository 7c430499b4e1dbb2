#include "sampa/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sampa/errors.hpp"

namespace sampa {
namespace {

// Stream ids used when deriving child generators from a problem or run seed.
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kDataStream = 0xDA7A;
constexpr std::uint64_t kNoiseStream = 0x401E;

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double row_dot(std::span<const double> row, const ParamVector& x) {
  double s = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
  return s;
}

}  // namespace

Batch::Batch(std::uint64_t id, std::vector<std::size_t> indices)
    : id_(id), indices_(std::make_shared<const std::vector<std::size_t>>(std::move(indices))) {
  if (indices_->empty()) throw std::invalid_argument("Batch: indices must be non-empty");
}

Batch Batch::full(std::size_t n_samples) {
  std::vector<std::size_t> idx(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) idx[i] = i;
  return Batch(kFullBatchId, std::move(idx));
}

ParamVector ProblemOracle::initial_point(std::uint64_t seed) const {
  SeededRng rng = SeededRng(seed).split(kInitStream);
  return gaussian_vector(rng, dim());
}

const Batch& ProblemOracle::full_batch() const {
  std::call_once(full_once_, [this] { full_batch_ = std::make_shared<const Batch>(Batch::full(n_samples())); });
  return *full_batch_;
}

void ProblemOracle::check_args(const ParamVector& x, const Batch& batch) const {
  if (x.dim() != dim()) {
    throw std::invalid_argument(std::string(name()) + ": point has dimension " + std::to_string(x.dim()) +
                                ", expected " + std::to_string(dim()));
  }
  const std::size_t n = n_samples();
  for (std::size_t i : batch.indices()) {
    if (i >= n) throw std::invalid_argument(std::string(name()) + ": batch index " + std::to_string(i) + " out of range");
  }
  if (!x.all_finite()) throw NumericError(std::string(name()) + ": non-finite parameter vector");
}

// ---------------------------------------------------------------------------
// toy_quadratic

ToyQuadratic::ToyQuadratic(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("toy_quadratic: dim must be >= 1");
}

double ToyQuadratic::value(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  return norm_sq(x);
}

ParamVector ToyQuadratic::gradient(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  return 2.0 * x;
}

// ---------------------------------------------------------------------------
// psd_quadratic

PsdQuadratic::PsdQuadratic(DenseMatrix a, ParamVector b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols()) throw ConfigError("psd_quadratic: A must be square");
  if (a_.rows() != b_.dim()) throw ConfigError("psd_quadratic: b has the wrong dimension");
  if (a_.rows() == 0) throw ConfigError("psd_quadratic: dim must be >= 1");
  if (!a_.is_symmetric()) throw ConfigError("psd_quadratic: A must be symmetric");
  lipschitz_ = power_iteration(a_);
  if (!(lipschitz_ >= 0.0)) throw ConfigError("psd_quadratic: A must be positive semidefinite");
  try {
    minimizer_ = solve_spd(a_, b_);
  } catch (const NumericError&) {
    minimizer_.reset();
  }
}

double PsdQuadratic::value(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  return 0.5 * dot(x, a_.multiply(x)) - dot(b_, x);
}

ParamVector PsdQuadratic::gradient(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  return a_.multiply(x) - b_;
}

std::optional<double> PsdQuadratic::infimum() const {
  if (!minimizer_) return std::nullopt;
  return -0.5 * dot(b_, *minimizer_);
}

std::shared_ptr<const PsdQuadratic> make_random_psd_quadratic(std::size_t dim, double lipschitz, double min_eig,
                                                              std::uint64_t seed) {
  if (dim == 0) throw ConfigError("psd_quadratic: dim must be >= 1");
  if (!(lipschitz > 0.0) || !(min_eig >= 0.0) || min_eig > lipschitz) {
    throw ConfigError("psd_quadratic: need 0 <= min_eig <= lipschitz and lipschitz > 0");
  }
  SeededRng rng = SeededRng(seed).split(kDataStream);

  // Orthonormal basis by modified Gram-Schmidt on Gaussian columns.
  std::vector<ParamVector> q;
  while (q.size() < dim) {
    ParamVector v = gaussian_vector(rng, dim);
    for (const auto& u : q) v.axpy(-dot(u, v), u);
    const double n = norm(v);
    if (n < 1e-8) continue;
    v *= 1.0 / n;
    q.push_back(std::move(v));
  }
  std::vector<double> eigs(dim);
  eigs[0] = lipschitz;
  for (std::size_t i = 1; i < dim; ++i) eigs[i] = min_eig + (lipschitz - min_eig) * rng.uniform();

  DenseMatrix a(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += q[k][i] * eigs[k] * q[k][j];
      a(i, j) = s;
      a(j, i) = s;
    }
  }
  ParamVector b = gaussian_vector(rng, dim);
  return std::make_shared<const PsdQuadratic>(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// logistic_regression

LogisticRegression::LogisticRegression(Dataset data, double ridge, std::vector<double> clean_labels)
    : data_(std::move(data)), ridge_(ridge), clean_labels_(std::move(clean_labels)) {
  data_.validate();
  if (data_.size() < 1 || data_.dim() < 1) throw ConfigError("logistic_regression: empty dataset");
  if (!(ridge_ >= 0.0)) throw ConfigError("logistic_regression: ridge must be >= 0");
  for (double y : data_.targets) {
    if (y != 0.0 && y != 1.0) throw ConfigError("logistic_regression: labels must be 0 or 1");
  }
  if (clean_labels_.empty()) clean_labels_ = data_.targets;
  if (clean_labels_.size() != data_.size()) throw ConfigError("logistic_regression: clean label count mismatch");

  lipschitz_ = spectral_norm_sq(data_.features) / (4.0 * static_cast<double>(data_.size())) + ridge_;

  // Damped Newton solve for the reference minimum.
  const std::size_t d = data_.dim();
  const std::size_t n = data_.size();
  const Batch& all = full_batch();
  ParamVector x(d, 0.0);
  double fx = value(x, all);
  for (int iter = 0; iter < 200; ++iter) {
    ParamVector g = gradient(x, all);
    if (norm(g) <= 1e-10) break;
    DenseMatrix h(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = data_.features.row(i);
      const double p = sigmoid(row_dot(row, x));
      const double w = p * (1.0 - p) / static_cast<double>(n);
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r; c < d; ++c) h(r, c) += w * row[r] * row[c];
      }
    }
    for (std::size_t r = 0; r < d; ++r) {
      h(r, r) += ridge_;
      for (std::size_t c = r + 1; c < d; ++c) h(c, r) = h(r, c);
    }
    ParamVector step = solve_spd(h, g);
    double t = 1.0;
    ParamVector trial = x;
    trial.axpy(-t, step);
    double ft = value(trial, all);
    while (ft > fx - 1e-4 * t * dot(g, step) && t > 1e-12) {
      t *= 0.5;
      trial = x;
      trial.axpy(-t, step);
      ft = value(trial, all);
    }
    if (!(ft <= fx)) break;
    x = std::move(trial);
    fx = ft;
  }
  minimizer_ = std::move(x);
  infimum_ = fx;
}

double LogisticRegression::value(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  double s = 0.0;
  for (std::size_t i : batch.indices()) {
    const double sign = 2.0 * data_.targets[i] - 1.0;
    s += softplus(-sign * row_dot(data_.features.row(i), x));
  }
  return s / static_cast<double>(batch.size()) + 0.5 * ridge_ * norm_sq(x);
}

ParamVector LogisticRegression::gradient(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  ParamVector g(x.dim(), 0.0);
  for (std::size_t i : batch.indices()) {
    const auto row = data_.features.row(i);
    const double sign = 2.0 * data_.targets[i] - 1.0;
    const double coef = -sign * sigmoid(-sign * row_dot(row, x));
    for (std::size_t c = 0; c < row.size(); ++c) g[c] += coef * row[c];
  }
  g *= 1.0 / static_cast<double>(batch.size());
  g.axpy(ridge_, x);
  return g;
}

ParamVector LogisticRegression::initial_point(std::uint64_t seed) const {
  SeededRng rng = SeededRng(seed).split(kInitStream);
  ParamVector x = gaussian_vector(rng, dim());
  x *= 1.0 / std::sqrt(static_cast<double>(dim()));
  return x;
}

std::size_t LogisticRegression::flipped_count() const noexcept {
  std::size_t k = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) k += (data_.targets[i] != clean_labels_[i]);
  return k;
}

std::shared_ptr<const LogisticRegression> make_logistic_regression(std::size_t n, std::size_t dim,
                                                                   std::uint64_t seed,
                                                                   std::optional<LabelNoiseSpec> noise) {
  if (n < 2) throw ConfigError("logistic_regression: n must be >= 2");
  if (dim < 1) throw ConfigError("logistic_regression: dim must be >= 1");
  SeededRng rng = SeededRng(seed).split(kDataStream);
  ParamVector direction = unit_direction(gaussian_vector(rng, dim));
  direction *= 1.5;

  Dataset data;
  data.features = DenseMatrix(n, dim);
  data.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double label = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const double sign = 2.0 * label - 1.0;
    for (std::size_t c = 0; c < dim; ++c) data.features(i, c) = sign * direction[c] + rng.normal();
    data.targets[i] = label;
  }
  std::vector<double> clean = data.targets;
  if (noise) {
    if (!(noise->flip_fraction >= 0.0 && noise->flip_fraction < 1.0)) {
      throw ConfigError("label noise: flip_fraction must be in [0, 1)");
    }
    const auto k = static_cast<std::size_t>(std::floor(noise->flip_fraction * static_cast<double>(n)));
    SeededRng noise_rng = SeededRng(noise->seed).split(kNoiseStream);
    const auto perm = random_permutation(noise_rng, n);
    for (std::size_t j = 0; j < k; ++j) data.targets[perm[j]] = 1.0 - data.targets[perm[j]];
  }
  return std::make_shared<const LogisticRegression>(std::move(data), LogisticRegression::kDefaultRidge,
                                                    std::move(clean));
}

// ---------------------------------------------------------------------------
// tiny_mlp

TinyMlp::TinyMlp(Dataset data, std::size_t hidden) : data_(std::move(data)), hidden_(hidden) {
  data_.validate();
  if (hidden_ < 1) throw ConfigError("tiny_mlp: hidden must be >= 1");
  if (data_.size() < 1 || data_.dim() < 1) throw ConfigError("tiny_mlp: empty dataset");
}

double TinyMlp::value(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  const std::size_t d = data_.dim();
  const std::size_t h = hidden_;
  const std::size_t b1 = h * d;
  const std::size_t w2 = b1 + h;
  const std::size_t b2 = w2 + h;
  double total = 0.0;
  for (std::size_t i : batch.indices()) {
    const auto a = data_.features.row(i);
    double out = x[b2];
    for (std::size_t j = 0; j < h; ++j) {
      double z = x[b1 + j];
      for (std::size_t c = 0; c < d; ++c) z += x[j * d + c] * a[c];
      out += x[w2 + j] * std::tanh(z);
    }
    const double r = out - data_.targets[i];
    total += 0.5 * r * r;
  }
  return total / static_cast<double>(batch.size());
}

ParamVector TinyMlp::gradient(const ParamVector& x, const Batch& batch) const {
  check_args(x, batch);
  const std::size_t d = data_.dim();
  const std::size_t h = hidden_;
  const std::size_t b1 = h * d;
  const std::size_t w2 = b1 + h;
  const std::size_t b2 = w2 + h;
  ParamVector g(x.dim(), 0.0);
  std::vector<double> act(h);
  for (std::size_t i : batch.indices()) {
    const auto a = data_.features.row(i);
    double out = x[b2];
    for (std::size_t j = 0; j < h; ++j) {
      double z = x[b1 + j];
      for (std::size_t c = 0; c < d; ++c) z += x[j * d + c] * a[c];
      act[j] = std::tanh(z);
      out += x[w2 + j] * act[j];
    }
    const double r = out - data_.targets[i];
    g[b2] += r;
    for (std::size_t j = 0; j < h; ++j) {
      g[w2 + j] += r * act[j];
      const double dz = r * x[w2 + j] * (1.0 - act[j] * act[j]);
      g[b1 + j] += dz;
      for (std::size_t c = 0; c < d; ++c) g[j * d + c] += dz * a[c];
    }
  }
  g *= 1.0 / static_cast<double>(batch.size());
  return g;
}

ParamVector TinyMlp::initial_point(std::uint64_t seed) const {
  SeededRng rng = SeededRng(seed).split(kInitStream);
  ParamVector x = gaussian_vector(rng, dim());
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(data_.dim()));
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(hidden_));
  const std::size_t split = hidden_ * (data_.dim() + 1);
  for (std::size_t i = 0; i < x.dim(); ++i) x[i] *= (i < split ? in_scale : out_scale);
  return x;
}

std::shared_ptr<const TinyMlp> make_tiny_mlp(std::size_t n, std::size_t dim_in, std::size_t hidden,
                                             std::uint64_t seed) {
  if (n < 1 || dim_in < 1) throw ConfigError("tiny_mlp: n and dim_in must be >= 1");
  if (hidden < 1) throw ConfigError("tiny_mlp: hidden must be >= 1");
  SeededRng rng = SeededRng(seed).split(kDataStream);
  Dataset data;
  data.features = DenseMatrix(n, dim_in);
  data.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim_in; ++c) data.features(i, c) = rng.normal();
  }
  // Teacher network of the same shape.
  Dataset probe{DenseMatrix(1, dim_in), {0.0}};
  TinyMlp teacher_shape(probe, hidden);
  SeededRng teacher_rng = rng.split(1);
  ParamVector teacher = gaussian_vector(teacher_rng, teacher_shape.dim());
  teacher *= 1.0 / std::sqrt(static_cast<double>(dim_in));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = data.features.row(i);
    double out = teacher[teacher.dim() - 1];
    for (std::size_t j = 0; j < hidden; ++j) {
      double z = teacher[hidden * dim_in + j];
      for (std::size_t c = 0; c < dim_in; ++c) z += teacher[j * dim_in + c] * a[c];
      out += teacher[hidden * dim_in + hidden + j] * std::tanh(z);
    }
    data.targets[i] = out + 0.1 * rng.normal();
  }
  return std::make_shared<const TinyMlp>(std::move(data), hidden);
}

double estimate_local_smoothness(const ProblemOracle& oracle, const ParamVector& x, SeededRng rng,
                                 std::size_t probes, double h) {
  const ParamVector g0 = oracle.full_gradient(x);
  double best = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    ParamVector u = unit_direction(gaussian_vector(rng, x.dim()));
    ParamVector xp = x;
    xp.axpy(h, u);
    best = std::max(best, norm(oracle.full_gradient(xp) - g0) / h);
  }
  return best;
}

// ---------------------------------------------------------------------------
// batching

BatchSampler::BatchSampler(std::size_t n_samples, std::size_t batch_size, SeededRng rng)
    : n_samples_(n_samples), batch_size_(batch_size), rng_(rng) {
  if (batch_size_ < 1 || batch_size_ > n_samples_) {
    throw ConfigError("batch_size must be in [1, " + std::to_string(n_samples_) + "], got " +
                      std::to_string(batch_size_));
  }
}

Batch BatchSampler::batch_at(std::uint64_t counter) const {
  if (batch_size_ == n_samples_) {
    std::vector<std::size_t> idx(n_samples_);
    for (std::size_t i = 0; i < n_samples_; ++i) idx[i] = i;
    return Batch(counter, std::move(idx));
  }
  const std::uint64_t per_epoch = batches_per_epoch();
  const std::uint64_t epoch = counter / per_epoch;
  const std::uint64_t pos = counter % per_epoch;
  if (epoch != cached_epoch_) {
    SeededRng epoch_rng = rng_.split(epoch);
    cached_perm_ = random_permutation(epoch_rng, n_samples_);
    cached_epoch_ = epoch;
  }
  const auto first = cached_perm_.begin() + static_cast<std::ptrdiff_t>(pos * batch_size_);
  return Batch(counter, std::vector<std::size_t>(first, first + static_cast<std::ptrdiff_t>(batch_size_)));
}

Batch sample_next_batch(const ProblemOracle& oracle, const SeededRng& rng, std::size_t batch_size,
                        std::uint64_t counter) {
  return BatchSampler(oracle.n_samples(), batch_size, rng).batch_at(counter);
}

}  // namespace sampa
