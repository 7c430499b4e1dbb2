#include "sampa/vecmath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sampa/errors.hpp"

namespace sampa {
namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

bool ParamVector::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ParamVector& ParamVector::axpy(double alpha, const ParamVector& other) {
  require_same_dim(dim(), other.dim(), "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
  return *this;
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_dim(dim(), other.dim(), "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_dim(dim(), other.dim(), "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double alpha) {
  for (double& v : data_) v *= alpha;
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double alpha, ParamVector a) { return a *= alpha; }

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a.dim(), b.dim(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const ParamVector& a) { return dot(a, a); }

double norm(const ParamVector& a) { return std::sqrt(norm_sq(a)); }

double distance(const ParamVector& a, const ParamVector& b) { return norm(a - b); }

ParamVector linear_combination(double alpha, const ParamVector& a, double beta, const ParamVector& b) {
  require_same_dim(a.dim(), b.dim(), "linear_combination");
  ParamVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = alpha * a[i] + beta * b[i];
  return out;
}

ParamVector unit_direction(const ParamVector& g, ZeroPolicy fallback) {
  if (!g.all_finite()) throw NumericError("unit_direction: non-finite entry in input");
  // Scale first so the norm cannot overflow for large but finite entries.
  double scale = 0.0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) {
    if (fallback == ZeroPolicy::throw_error) throw NumericError("unit_direction: zero vector");
    return ParamVector(g.dim(), 0.0);
  }
  ParamVector out = g;
  for (double& v : out) v /= scale;
  const double n = norm(out);
  for (double& v : out) v /= n;
  return out;
}

std::optional<double> cosine_similarity(const ParamVector& a, const ParamVector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

bool DenseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

ParamVector DenseMatrix::multiply(const ParamVector& x) const {
  require_same_dim(cols_, x.dim(), "DenseMatrix::multiply");
  ParamVector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    const double* row_ptr = data_.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) s += row_ptr[c] * x[c];
    out[r] = s;
  }
  return out;
}

ParamVector DenseMatrix::multiply_transpose(const ParamVector& y) const {
  require_same_dim(rows_, y.dim(), "DenseMatrix::multiply_transpose");
  ParamVector out(cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row_ptr = data_.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) out[c] += row_ptr[c] * y[r];
  }
  return out;
}

namespace {

template <typename Apply>
double power_method(std::size_t n, Apply&& apply, double tol, std::size_t max_iter) {
  if (n == 0) return 0.0;
  ParamVector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 97);
  v *= 1.0 / norm(v);
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    ParamVector w = apply(v);
    lambda = dot(v, w);
    // Residual test: for symmetric operators the Rayleigh quotient error is
    // bounded by ||r||^2 / gap, much tighter than the change between sweeps.
    ParamVector r = w;
    r.axpy(-lambda, v);
    const double wn = norm(w);
    if (wn == 0.0) return 0.0;
    if (norm(r) <= tol * std::abs(lambda)) return lambda;
    w *= 1.0 / wn;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace

double power_iteration(const DenseMatrix& sym, double tol, std::size_t max_iter) {
  if (sym.rows() != sym.cols()) throw std::invalid_argument("power_iteration: matrix is not square");
  return power_method(sym.rows(), [&](const ParamVector& v) { return sym.multiply(v); }, tol, max_iter);
}

double spectral_norm_sq(const DenseMatrix& x, double tol, std::size_t max_iter) {
  return power_method(
      x.cols(), [&](const ParamVector& v) { return x.multiply_transpose(x.multiply(v)); }, tol, max_iter);
}

ParamVector solve_spd(const DenseMatrix& a, const ParamVector& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.dim() != n) throw std::invalid_argument("solve_spd: shape mismatch");
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericError("solve_spd: matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  ParamVector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * z[k];
    z[i] = s / l(i, i);
  }
  ParamVector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = z[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

}  // namespace sampa
