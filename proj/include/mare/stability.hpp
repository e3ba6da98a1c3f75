#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"
#include "mare/riccati.hpp"

namespace mare {

/// The delivery-averaged quadratic map Y -> sum_I w_I F_I Y F_Iᵀ for a
/// fixed gain.  Factors for all 2^m delivery patterns are cached at
/// construction; the object is immutable afterwards.
class LyapOperator {
 public:
  LyapOperator(const PlantModel& p, const SubsetTable& table, const GainMatrix& gain)
      : n_(p.state_dim()), weights_(table.weights) {
    factors_.reserve(table.size());
    for (std::size_t idx = 0; idx < table.size(); ++idx)
      factors_.push_back(closed_loop_factor(p, gain, table.masks[idx]));
  }

  std::size_t state_dim() const { return n_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Matrix>& factors() const { return factors_; }

 private:
  std::size_t n_;
  std::vector<double> weights_;
  std::vector<Matrix> factors_;
};

/// Applies the operator; linear and monotone (PSD in, PSD out).
inline SymMatrix lyap_apply(const LyapOperator& op, const SymMatrix& y) {
  Matrix acc(op.state_dim(), op.state_dim());
  for (std::size_t idx = 0; idx < op.factors().size(); ++idx) {
    const double w = op.weights()[idx];
    if (w == 0.0) continue;
    const Matrix& f = op.factors()[idx];
    acc += w * (f * y.mat() * f.transpose());
  }
  return SymMatrix(acc);
}

/// Vectorized form: the n² x n² matrix T = sum_I w_I (F_I ⊗ F_I) with
/// T·vec(Y) = vec(apply(Y)) under the column-stacking convention.
inline Matrix lyap_matrix(const LyapOperator& op) {
  const std::size_t n = op.state_dim();
  if (n > 30)
    throw DimensionError("lyap_matrix: state dimension " + std::to_string(n) +
                         " exceeds the n <= 30 guard (n^2 x n^2 dense build)");
  Matrix t(n * n, n * n);
  for (std::size_t idx = 0; idx < op.factors().size(); ++idx) {
    const double w = op.weights()[idx];
    if (w == 0.0) continue;
    t += w * kron(op.factors()[idx], op.factors()[idx]);
  }
  return t;
}

struct SpectralRadius {
  double value = 0.0;      ///< dominant-eigenvalue estimate of the vectorized map
  double residual = 0.0;   ///< ‖Tv - λv‖ / max(1, |λ|) at the returned estimate
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline SpectralRadius power_iteration(const Matrix& t, Matrix v, double tol,
                                      std::size_t max_iter) {
  SpectralRadius out;
  const double nv0 = frobenius_norm(v);
  v *= 1.0 / nv0;
  double lambda_prev = std::numeric_limits<double>::quiet_NaN();
  double lambda = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Matrix w = t * v;
    const double nw = frobenius_norm(w);
    out.iterations = it;
    if (nw == 0.0) {  // v annihilated: the map is zero on this start
      out.value = 0.0;
      out.residual = 0.0;
      out.converged = true;
      return out;
    }
    lambda = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) lambda += v(i, 0) * w(i, 0);
    v = (1.0 / nw) * w;
    if (std::isfinite(lambda_prev) &&
        std::abs(lambda - lambda_prev) <= tol * std::max(1.0, std::abs(lambda))) {
      out.converged = true;
      break;
    }
    lambda_prev = lambda;
  }
  const Matrix w = t * v;
  double rayleigh = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) rayleigh += v(i, 0) * w(i, 0);
  out.value = std::abs(rayleigh);
  out.residual = frobenius_norm(w - rayleigh * v) / std::max(1.0, std::abs(rayleigh));
  return out;
}

}  // namespace detail

/// Spectral radius of the vectorized operator by power iteration from
/// vec(I).  The start lies in the interior of the PSD cone, which the map
/// preserves, so the dominant eigenvalue is reached; one perturbed restart
/// covers the exceptional orthogonal-start case.  Non-convergence is
/// reported through the flag and residual instead of a throw so callers
/// can fall back to the bounded-iteration test.
inline SpectralRadius ms_spectral_radius(const LyapOperator& op,
                                         double tol = 1e-10,
                                         std::size_t max_iter = 100000) {
  const Matrix t = lyap_matrix(op);
  const std::size_t n = op.state_dim();
  SpectralRadius r = detail::power_iteration(t, vec(Matrix::identity(n)), tol, max_iter);
  if (!r.converged) {
    Matrix start = vec(Matrix::identity(n));
    start(0, 0) += 1e-3;
    SpectralRadius retry = detail::power_iteration(t, start, tol, max_iter);
    retry.iterations += r.iterations;
    return retry;
  }
  return r;
}

enum class LyapVerdict { Bounded, Unbounded, Indeterminate };

inline const char* to_string(LyapVerdict v) {
  switch (v) {
    case LyapVerdict::Bounded: return "bounded";
    case LyapVerdict::Unbounded: return "unbounded";
    default: return "indeterminate";
  }
}

struct LyapIterateResult {
  LyapVerdict verdict = LyapVerdict::Indeterminate;
  SymMatrix limit;  ///< limit of the recursion when bounded
  std::size_t iterations = 0;
};

/// Runs Y_{k+1} = apply(Y_k) + offset from Y_0 = 0.  Declared bounded when
/// the relative step ‖Y_{k+1} - Y_k‖_F / max(1, ‖Y_k‖_F) drops below 1e-10,
/// unbounded when ‖Y_k‖_F exceeds `bound` (0 means 1e12 * max(1, ‖offset‖_F)).
inline LyapIterateResult lyap_iterate(const LyapOperator& op, const SymMatrix& offset,
                                      std::size_t max_iter = 100000,
                                      double bound = 0.0) {
  if (offset.dim() != op.state_dim())
    throw DimensionError("lyap_iterate: offset dimension mismatch");
  const double limit_norm =
      bound > 0.0 ? bound : 1e12 * std::max(1.0, frobenius_norm(offset));
  LyapIterateResult out;
  SymMatrix y(op.state_dim());
  for (std::size_t k = 0; k < max_iter; ++k) {
    const SymMatrix next = lyap_apply(op, y) + offset;
    out.iterations = k + 1;
    if (!is_finite(next) || frobenius_norm(next) > limit_norm) {
      out.verdict = LyapVerdict::Unbounded;
      return out;
    }
    const double res = frobenius_norm(next - y) / std::max(1.0, frobenius_norm(y));
    y = next;
    if (res <= 1e-10) {
      out.verdict = LyapVerdict::Bounded;
      out.limit = y;
      return out;
    }
  }
  out.verdict = LyapVerdict::Indeterminate;
  out.limit = y;
  return out;
}

}  // namespace mare
