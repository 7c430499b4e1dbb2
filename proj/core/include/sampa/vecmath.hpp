#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace sampa {

/// Dense real parameter vector. All arithmetic is 64-bit.
///
/// The dimension is fixed at construction; the in-place operations below
/// require both operands to share it and throw std::invalid_argument otherwise.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool all_finite() const noexcept;

  /// this += alpha * other
  ParamVector& axpy(double alpha, const ParamVector& other);
  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double alpha);

  /// Bitwise element equality (so -0.0 == 0.0 and NaN != NaN, as for double).
  friend bool operator==(const ParamVector& a, const ParamVector& b) { return a.data_ == b.data_; }

 private:
  std::vector<double> data_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double alpha, ParamVector a);

double dot(const ParamVector& a, const ParamVector& b);
double norm_sq(const ParamVector& a);
double norm(const ParamVector& a);
double distance(const ParamVector& a, const ParamVector& b);

/// alpha * a + beta * b, evaluated element-wise in exactly that operand order.
ParamVector linear_combination(double alpha, const ParamVector& a, double beta, const ParamVector& b);

/// Behavior of unit_direction at the origin.
enum class ZeroPolicy {
  zero_perturbation,  ///< return the zero vector
  throw_error,        ///< raise NumericError
};

/// g / ||g||_2 over the whole flattened vector. Throws NumericError on
/// non-finite entries. The zero vector maps according to `fallback`.
ParamVector unit_direction(const ParamVector& g, ZeroPolicy fallback = ZeroPolicy::zero_perturbation);

/// Cosine of the angle between a and b; empty when either has zero norm.
std::optional<double> cosine_similarity(const ParamVector& a, const ParamVector& b);

/// Row-major dense square or rectangular matrix, used for quadratic test
/// problems and small design matrices.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  bool is_symmetric(double tol = 0.0) const;

  ParamVector multiply(const ParamVector& x) const;
  /// this^T * y
  ParamVector multiply_transpose(const ParamVector& y) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
/// Stops when ||A v - lambda v|| <= tol * |lambda| or after max_iter sweeps.
double power_iteration(const DenseMatrix& sym, double tol = 1e-10, std::size_t max_iter = 10000);

/// Largest eigenvalue of X^T X (squared spectral norm of X) without forming it.
double spectral_norm_sq(const DenseMatrix& x, double tol = 1e-10, std::size_t max_iter = 10000);

/// Solve A x = b for symmetric positive definite A (Cholesky). Throws
/// NumericError when A is not numerically positive definite.
ParamVector solve_spd(const DenseMatrix& a, const ParamVector& b);

}  // namespace sampa
