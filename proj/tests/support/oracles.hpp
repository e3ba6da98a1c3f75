#pragma once

// Independent reference implementations used only by tests.  Everything in
// here recomputes results from first principles (plain loops, Gaussian
// elimination, Jacobi rotations) so it shares no code path with the library
// routines it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"
#include "mare/riccati.hpp"

namespace oracle {

inline mare::Matrix naive_mat_mul(const mare::Matrix& a, const mare::Matrix& b) {
  mare::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// Dense solve by Gaussian elimination with partial pivoting.
inline mare::Matrix gauss_solve(mare::Matrix a, mare::Matrix rhs) {
  const std::size_t n = a.rows();
  if (a.cols() != n || rhs.rows() != n)
    throw std::runtime_error("gauss_solve: bad shapes");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("gauss_solve: singular");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
      for (std::size_t c = 0; c < rhs.cols(); ++c)
        std::swap(rhs(pivot, c), rhs(col, c));
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      for (std::size_t c = 0; c < rhs.cols(); ++c) rhs(r, c) -= f * rhs(col, c);
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < rhs.cols(); ++c) rhs(r, c) /= a(r, r);
  return rhs;
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
inline std::vector<double> jacobi_eigenvalues(const mare::SymMatrix& s) {
  const std::size_t n = s.dim();
  mare::Matrix a = s.mat();
  const double scale = std::max(1.0, mare::frobenius_norm(s));
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-14 * scale) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) <= 1e-300) continue;
        const double theta = 0.5 * (a(q, q) - a(p, p)) / a(p, q);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> eigs(n);
  for (std::size_t i = 0; i < n; ++i) eigs[i] = a(i, i);
  std::sort(eigs.begin(), eigs.end());
  return eigs;
}

inline double min_eig(const mare::SymMatrix& s) { return jacobi_eigenvalues(s).front(); }

/// Classical Riccati iteration for fully reliable channels, written out
/// directly with a Gaussian-elimination inverse.
inline mare::Matrix classical_riccati_fixed_point(const mare::Matrix& a,
                                                  const mare::Matrix& b,
                                                  const mare::Matrix& u,
                                                  const mare::Matrix& w,
                                                  double tol = 1e-12,
                                                  std::size_t max_iter = 200000) {
  const std::size_t n = a.rows();
  mare::Matrix s(n, n);
  const mare::Matrix at = a.transpose();
  const mare::Matrix bt = b.transpose();
  for (std::size_t k = 0; k < max_iter; ++k) {
    const mare::Matrix curv = u + naive_mat_mul(naive_mat_mul(bt, s), b);
    const mare::Matrix bsa = naive_mat_mul(naive_mat_mul(bt, s), a);
    const mare::Matrix gain_term = gauss_solve(curv, bsa);
    const mare::Matrix ats = naive_mat_mul(at, s);
    const mare::Matrix next = naive_mat_mul(ats, a) + w -
                              naive_mat_mul(naive_mat_mul(ats, b), gain_term);
    const double res = mare::frobenius_norm(next - s) /
                       std::max(1.0, mare::frobenius_norm(s));
    s = next;
    if (res <= tol) return s;
  }
  throw std::runtime_error("classical_riccati_fixed_point: no convergence");
}

/// Steady-state second moment by direct linear solve of the vectorized
/// stationarity equation (I - sum_I w_I G_I (x) G_I) vec(S) = vec(Q).
inline mare::Matrix lyapunov_direct(const std::vector<mare::Matrix>& g,
                                    const std::vector<double>& weights,
                                    const mare::Matrix& q) {
  const std::size_t n = q.rows();
  mare::Matrix t(n * n, n * n);
  for (std::size_t idx = 0; idx < g.size(); ++idx)
    t += weights[idx] * mare::kron(g[idx], g[idx]);
  const mare::Matrix lhs = mare::Matrix::identity(n * n) - t;
  const mare::Matrix sol = gauss_solve(lhs, mare::vec(q));
  return mare::unvec(sol, n, n);
}

}  // namespace oracle
