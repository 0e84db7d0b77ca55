#pragma once

// Small dense complex matrices for the rate calculus and precoders.
//
// Everything here works on matrices of at most a handful of rows (the
// antenna counts), so the routines favour clarity and numerical robustness
// over blocking or vectorization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rsma/errors.hpp"

namespace rsma {

using cplx = std::complex<double>;

/// Row-major dense complex matrix.
class CMatrix {
 public:
  CMatrix() = default;

  CMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeMismatch("CMatrix: entry count does not match rows*cols");
    }
  }

  CMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw ShapeMismatch("CMatrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static CMatrix column_vector(std::span<const cplx> v) {
    return CMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> entries() noexcept { return data_; }
  std::span<const cplx> entries() const noexcept { return data_; }

  CMatrix column(std::size_t c) const {
    CMatrix out(rows_, 1);
    for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
    return out;
  }

  CMatrix row(std::size_t r) const {
    CMatrix out(1, cols_);
    for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, const CMatrix& v) {
    if (v.rows() != rows_ || v.cols() != 1) throw ShapeMismatch("set_column: shape");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v(r, 0);
  }

  /// First `n` columns.
  CMatrix leading_columns(std::size_t n) const {
    n = std::min(n, cols_);
    CMatrix out(rows_, n);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < n; ++c) out(r, c) = (*this)(r, c);
    return out;
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return s;
  }
  double frobenius_norm() const noexcept { return std::sqrt(squared_norm()); }

  double column_squared_norm(std::size_t c) const {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += std::norm((*this)(r, c));
    return s;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  CMatrix& operator+=(const CMatrix& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  CMatrix& operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  void require_same_shape(const CMatrix& o, const char* what) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) {
      throw ShapeMismatch(std::string(what) + ": shape mismatch");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

inline CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
inline CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
inline CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
inline CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matmul: " << a.rows() << "x" << a.cols() << " * " << b.rows() << "x" << b.cols();
    throw ShapeMismatch(os.str());
  }
  CMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline CMatrix hermitian(const CMatrix& a) {
  CMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = std::conj(a(r, c));
  return out;
}

/// A * A^H.
inline CMatrix gram_outer(const CMatrix& a) { return a * hermitian(a); }

inline cplx trace(const CMatrix& a) {
  cplx t{0.0, 0.0};
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

namespace linalg_tol {
inline constexpr double kHermitian = 1e-10;
inline constexpr double kCondition = 1e12;
inline constexpr double kEigenRelChange = 1e-10;
inline constexpr double kEigenAcceptable = 1e-6;
inline constexpr int kEigenMaxIterations = 10000;
}  // namespace linalg_tol

/// Natural log of det(A) for Hermitian positive definite A, via Cholesky.
inline double logdet_hpd(const CMatrix& a) {
  if (!a.is_square()) throw ShapeMismatch("logdet_hpd: matrix not square");
  const std::size_t n = a.rows();
  const double scale = a.frobenius_norm();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      if (std::abs(a(i, j) - std::conj(a(j, i))) > linalg_tol::kHermitian * scale) {
        throw NotHpdError("logdet_hpd: matrix is not Hermitian");
      }
    }

  // Lower-triangular L with A = L L^H; only the lower triangle of A is read.
  CMatrix l(n, n);
  double logdet = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) pivot -= std::norm(l(j, k));
    if (!(pivot > 0.0)) throw NotHpdError("logdet_hpd: non-positive pivot");
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    logdet += 2.0 * std::log(ljj);
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / ljj;
    }
  }
  return logdet;
}

namespace detail {

struct LuFactors {
  CMatrix lu;
  std::vector<std::size_t> perm;
};

// Doolittle LU with partial pivoting; throws SingularError on an exactly
// zero pivot column.
inline LuFactors lu_factor(const CMatrix& a) {
  const std::size_t n = a.rows();
  LuFactors f{a, std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  auto& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        p = i;
      }
    }
    if (best == 0.0) throw SingularError("solve: matrix is singular");
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(k, c), m(p, c));
      std::swap(f.perm[k], f.perm[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      m(i, k) /= m(k, k);
      const cplx lik = m(i, k);
      for (std::size_t c = k + 1; c < n; ++c) m(i, c) -= lik * m(k, c);
    }
  }
  return f;
}

inline CMatrix lu_solve(const LuFactors& f, const CMatrix& b) {
  const std::size_t n = f.lu.rows();
  CMatrix x(n, b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    std::vector<cplx> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = b(f.perm[i], c);
      for (std::size_t k = 0; k < i; ++k) s -= f.lu(i, k) * y[k];
      y[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      cplx s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= f.lu(ii, k) * x(k, c);
      x(ii, c) = s / f.lu(ii, ii);
    }
  }
  return x;
}

inline double norm1(const CMatrix& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += std::abs(a(r, c));
    best = std::max(best, s);
  }
  return best;
}

}  // namespace detail

/// 1-norm condition number, computed from an explicit inverse (n is tiny).
inline double condition_number(const CMatrix& a) {
  if (!a.is_square()) throw ShapeMismatch("condition_number: matrix not square");
  if (a.rows() == 0) return 1.0;
  try {
    const auto f = detail::lu_factor(a);
    const CMatrix inv = detail::lu_solve(f, CMatrix::identity(a.rows()));
    const double c = detail::norm1(a) * detail::norm1(inv);
    return std::isfinite(c) ? c : INFINITY;
  } catch (const SingularError&) {
    return INFINITY;
  }
}

/// Solves A X = B. Throws SingularError when cond_1(A) exceeds 1e12.
inline CMatrix solve(const CMatrix& a, const CMatrix& b) {
  if (!a.is_square()) throw ShapeMismatch("solve: matrix not square");
  if (b.rows() != a.rows()) throw ShapeMismatch("solve: right-hand side rows");
  const auto f = detail::lu_factor(a);
  const CMatrix inv = detail::lu_solve(f, CMatrix::identity(a.rows()));
  const double cond = detail::norm1(a) * detail::norm1(inv);
  if (!std::isfinite(cond) || cond > linalg_tol::kCondition) {
    std::ostringstream os;
    os << "solve: condition estimate " << cond << " exceeds " << linalg_tol::kCondition;
    throw SingularError(os.str());
  }
  return detail::lu_solve(f, b);
}

inline CMatrix inverse(const CMatrix& a) { return solve(a, CMatrix::identity(a.rows())); }

/// v^H A v for a column vector v.
inline cplx quadratic_form(const CMatrix& a, const CMatrix& v) {
  return (hermitian(v) * a * v)(0, 0);
}

inline double rayleigh_quotient(const CMatrix& a, const CMatrix& b, const CMatrix& v) {
  return quadratic_form(a, v).real() / quadratic_form(b, v).real();
}

/// Rotates a column vector so its largest-magnitude entry is real positive.
inline CMatrix normalize_phase(CMatrix v) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    if (std::abs(v(i, 0)) > best) {
      best = std::abs(v(i, 0));
      arg = i;
    }
  }
  if (best > 0.0) {
    v *= std::conj(v(arg, 0)) / best;
    v(arg, 0) = cplx(std::abs(v(arg, 0)), 0.0);
  }
  return v;
}

/// Unit-norm maximizer of (v^H A v)/(v^H B v) for A Hermitian PSD and B
/// Hermitian PD, by power iteration on B^{-1} A.
inline CMatrix dominant_gen_eigvec(const CMatrix& a, const CMatrix& b) {
  if (!a.is_square() || !b.is_square() || a.rows() != b.rows()) {
    throw ShapeMismatch("dominant_gen_eigvec: shapes");
  }
  const std::size_t n = a.rows();
  const CMatrix op = solve(b, a);

  // Start from the column of B^{-1}A with the largest norm; it has a
  // nonzero component along the dominant direction unless A == 0.
  std::size_t start = 0;
  double best = -1.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (op.column_squared_norm(c) > best) {
      best = op.column_squared_norm(c);
      start = c;
    }
  }
  if (best <= 0.0) {
    CMatrix e(n, 1);
    e(0, 0) = 1.0;
    return e;
  }

  CMatrix v = op.column(start);
  v *= 1.0 / v.frobenius_norm();
  double lambda = rayleigh_quotient(a, b, v);
  double rel_change = INFINITY;
  for (int it = 0; it < linalg_tol::kEigenMaxIterations; ++it) {
    CMatrix next = op * v;
    const double nn = next.frobenius_norm();
    if (nn == 0.0) break;
    next *= 1.0 / nn;
    const double next_lambda = rayleigh_quotient(a, b, next);
    rel_change = std::abs(next_lambda - lambda) / std::max(std::abs(next_lambda), 1e-300);
    v = std::move(next);
    lambda = next_lambda;
    if (rel_change < linalg_tol::kEigenRelChange) {
      rel_change = 0.0;
      break;
    }
  }
  if (rel_change > linalg_tol::kEigenAcceptable) {
    throw NoConvergenceError("dominant_gen_eigvec: iteration cap reached");
  }
  return normalize_phase(std::move(v));
}

}  // namespace rsma
