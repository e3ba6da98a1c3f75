#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mare {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite entries or otherwise invalid numeric input.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Raised when a positive definite matrix was required but a Cholesky
/// pivot fell below tolerance.  `pivot` is the 1-based pivot position.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& msg, std::size_t pivot)
      : Error(msg), pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Relative pivot tolerance for positive definiteness checks.
inline constexpr double kPdPivotTol = 1e-12;

/// Dense row-major matrix of doubles.  Small sizes only; every operation
/// is a plain loop so results are deterministic for fixed inputs.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    a_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_)
        throw DimensionError("Matrix: ragged initializer rows");
      a_.insert(a_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }

  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (double& v : a_) v *= s;
    return *this;
  }

 private:
  void require_same_shape(const Matrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string(op) + ": shape mismatch (" +
                           shape_string(*this) + " vs " + shape_string(o) + ")");
  }

  static std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows_) + "x" + std::to_string(m.cols_);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }
inline Matrix operator-(Matrix a) { return a *= -1.0; }

/// Plain triple-loop product.
inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("mat_mul: inner dimensions disagree (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) { return mat_mul(a, b); }

inline bool is_finite(const Matrix& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) return false;
  return true;
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s = std::max(s, std::abs(v));
  return s;
}

inline double trace(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("trace: matrix not square");
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, i);
  return s;
}

/// Symmetric matrix.  Construction from a square Matrix symmetrizes as
/// (M + Mᵀ)/2, so the stored mirror entries are bitwise equal; arithmetic
/// between SymMatrix values keeps them that way.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(std::size_t dim) : m_(dim, dim) {}

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols())
      throw DimensionError("SymMatrix: matrix not square (" +
                           std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ")");
    m_ = Matrix(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        m_(i, j) = 0.5 * (m(i, j) + m(j, i));
  }

  static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }

  static SymMatrix diagonal(const std::vector<double>& d) {
    SymMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s.m_(i, i) = d[i];
    return s;
  }

  std::size_t dim() const { return m_.rows(); }
  bool empty() const { return m_.empty(); }

  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  /// Sets both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Matrix& mat() const { return m_; }

  SymMatrix& operator+=(const SymMatrix& o) {
    m_ += o.m_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    m_ -= o.m_;
    return *this;
  }
  SymMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }

 private:
  Matrix m_;
};

inline SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
inline SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
inline SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
inline SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

inline bool is_finite(const SymMatrix& m) { return is_finite(m.mat()); }
inline double frobenius_norm(const SymMatrix& m) { return frobenius_norm(m.mat()); }
inline double max_abs(const SymMatrix& m) { return max_abs(m.mat()); }
inline double trace(const SymMatrix& m) { return trace(m.mat()); }

struct CholeskyResult {
  bool ok = false;
  Matrix lower;                 // valid only when ok
  std::size_t failed_pivot = 0; // 1-based pivot position, 0 when ok
  double min_pivot = 0.0;       // smallest pivot value encountered (pre-sqrt)
};

/// Lower Cholesky factor of a symmetric matrix.  A pivot is accepted when
/// it exceeds tol * max-diagonal; the relative threshold keeps the verdict
/// meaningful across problem scales.  On failure the partial factor is
/// discarded and the failing pivot is reported.
inline CholeskyResult cholesky(const SymMatrix& m, double tol = kPdPivotTol) {
  if (!is_finite(m)) throw ValueError("cholesky: non-finite entries");
  const std::size_t n = m.dim();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    max_diag = (i == 0) ? m(0, 0) : std::max(max_diag, m(i, i));
  const double threshold = tol * max_diag;

  CholeskyResult r;
  r.lower = Matrix(n, n);
  r.min_pivot = std::numeric_limits<double>::infinity();
  Matrix& L = r.lower;
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    r.min_pivot = std::min(r.min_pivot, d);
    if (!(d > threshold)) {
      r.ok = false;
      r.failed_pivot = j + 1;
      r.lower = Matrix();
      return r;
    }
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  r.ok = true;
  return r;
}

/// Solves L Lᵀ X = rhs given the lower factor L.
inline Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs) {
  const std::size_t n = lower.rows();
  if (rhs.rows() != n)
    throw DimensionError("cholesky_solve: rhs has " + std::to_string(rhs.rows()) +
                         " rows, expected " + std::to_string(n));
  Matrix x = rhs;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
      x(i, c) = s / lower(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {  // backward: Lᵀ x = y
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x(k, c);
      x(ii, c) = s / lower(ii, ii);
    }
  }
  return x;
}

/// Cholesky-style lower factor of a PSD matrix, tolerating singularity:
/// columns whose pivot is within tolerance of zero are zeroed, so L Lᵀ = m
/// still holds for genuinely PSD input (the zero matrix factors to zero).
/// Clearly indefinite input is rejected.
inline Matrix psd_factor(const SymMatrix& m) {
  if (!is_finite(m)) throw ValueError("psd_factor: non-finite entries");
  const std::size_t n = m.dim();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, m(i, i));
  const double drop = kPdPivotTol * std::max(1.0, max_diag);
  const double neg = -1e-8 * std::max(1.0, frobenius_norm(m));

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= drop) {
      if (d < neg)
        throw ValueError("psd_factor: matrix is not positive semidefinite");
      continue;  // leave column j zero
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves m X = rhs for symmetric positive definite m.
inline Matrix solve_spd(const SymMatrix& m, const Matrix& rhs,
                        double tol = kPdPivotTol) {
  CholeskyResult c = cholesky(m, tol);
  if (!c.ok)
    throw NotPositiveDefinite("solve_spd: matrix not positive definite (pivot " +
                                  std::to_string(c.failed_pivot) + " = " +
                                  std::to_string(c.min_pivot) + ")",
                              c.failed_pivot);
  return cholesky_solve(c.lower, rhs);
}

/// Guaranteed lower bound on the smallest eigenvalue, tight to
/// 1e-8 * max(1, ‖m‖_F).  Bisection on the Cholesky feasibility of
/// m - t·I between the Gershgorin lower bound and the smallest diagonal
/// entry; no eigendecomposition involved.
inline double min_eig_lower_bound(const SymMatrix& m) {
  if (!is_finite(m)) throw ValueError("min_eig_lower_bound: non-finite entries");
  const std::size_t n = m.dim();
  if (n == 0) throw DimensionError("min_eig_lower_bound: empty matrix");

  double lo = std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) radius += std::abs(m(i, j));
    lo = std::min(lo, m(i, i) - radius);
    hi = std::min(hi, m(i, i));
  }
  const double tight = 1e-8 * std::max(1.0, frobenius_norm(m));
  while (hi - lo > tight) {
    const double mid = 0.5 * (lo + hi);
    SymMatrix shifted = m;
    shifted -= mid * SymMatrix::identity(n);
    if (cholesky(shifted).ok)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

/// Kronecker product: entry (i*p + k, j*q + l) = a(i,j) * b(k,l) for b of
/// size p x q.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t p = b.rows(), q = b.cols();
  Matrix c(a.rows() * p, a.cols() * q);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < q; ++l)
          c(i * p + k, j * q + l) = aij * b(k, l);
    }
  return c;
}

/// Column-stacking vectorization: vec(X)(j*rows + i) = X(i,j).  This is
/// the convention used throughout; kron(a,b)·vec(X) = vec(b·X·aᵀ).
inline Matrix vec(const Matrix& m) {
  Matrix v(m.rows() * m.cols(), 1);
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) v(j * m.rows() + i, 0) = m(i, j);
  return v;
}

inline Matrix unvec(const Matrix& v, std::size_t rows, std::size_t cols) {
  if (v.cols() != 1 || v.rows() != rows * cols)
    throw DimensionError("unvec: vector length does not match target shape");
  Matrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = v(j * rows + i, 0);
  return m;
}

inline std::ostream& operator<<(std::ostream& os, const Matrix& m) {
  os << "[";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << (i == 0 ? "[" : " [");
    for (std::size_t j = 0; j < m.cols(); ++j)
      os << m(i, j) << (j + 1 < m.cols() ? ", " : "");
    os << "]" << (i + 1 < m.rows() ? "\n" : "");
  }
  return os << "]";
}

inline std::ostream& operator<<(std::ostream& os, const SymMatrix& m) {
  return os << m.mat();
}

}  // namespace mare
