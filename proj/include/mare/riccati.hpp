#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"

namespace mare {

/// The update direction of the gain cannot be computed because the masked
/// curvature matrix is singular.  Carries the remedy in the message.
class SingularCurvature : public Error {
 public:
  using Error::Error;
};

/// Discrete-time plant controlled over lossy actuation channels.
/// The state update weight W and control weight U are cost weights, not
/// noise covariances.
struct PlantModel {
  Matrix A;             ///< n x n state map
  Matrix B;             ///< n x m input map, one column per channel
  SymMatrix U;          ///< m x m control cost weight, PSD
  SymMatrix W;          ///< n x n state cost weight, PSD
  ChannelSpec channels; ///< arrival probabilities, channels.m == B.cols()

  std::size_t state_dim() const { return A.rows(); }
  std::size_t input_dim() const { return B.cols(); }

  void validate() const {
    const std::size_t n = A.rows();
    const std::size_t m = B.cols();
    if (n == 0 || A.cols() != n)
      throw DimensionError("PlantModel: A must be square and non-empty");
    if (B.rows() != n)
      throw DimensionError("PlantModel: B has " + std::to_string(B.rows()) +
                           " rows, expected " + std::to_string(n));
    if (U.dim() != m)
      throw DimensionError("PlantModel: U is " + std::to_string(U.dim()) +
                           "-dimensional, expected " + std::to_string(m));
    if (W.dim() != n)
      throw DimensionError("PlantModel: W is " + std::to_string(W.dim()) +
                           "-dimensional, expected " + std::to_string(n));
    if (channels.m != m)
      throw DimensionError("PlantModel: channel count " +
                           std::to_string(channels.m) + " != B columns " +
                           std::to_string(m));
    channels.validate();
    if (!is_finite(A) || !is_finite(B))
      throw ValueError("PlantModel: non-finite entries in A or B");
    if (min_eig_lower_bound(U) < -1e-8 * std::max(1.0, frobenius_norm(U)))
      throw ValueError("PlantModel: U must be positive semidefinite");
    if (min_eig_lower_bound(W) < -1e-8 * std::max(1.0, frobenius_norm(W)))
      throw ValueError("PlantModel: W must be positive semidefinite");
  }
};

/// State-feedback gain, n x m.  The control applied on channel i is
/// column i of Kᵀx.
struct GainMatrix {
  Matrix K;
};

enum class SolveVerdict { Converged, Diverged, MaxIterReached };

inline const char* to_string(SolveVerdict v) {
  switch (v) {
    case SolveVerdict::Converged: return "converged";
    case SolveVerdict::Diverged: return "diverged";
    default: return "max-iterations";
  }
}

struct SolverConfig {
  double tol = 1e-10;          ///< relative residual threshold
  std::size_t max_iter = 10000;
  /// Iterates whose Frobenius norm exceeds this are declared divergent;
  /// 0 means the default 1e12 * max(1, ‖W‖_F).
  double divergence_threshold = 0.0;
  std::optional<SymMatrix> initial;  ///< S_0; empty means zero

  void validate() const {
    if (!(tol > 0.0)) throw ValueError("SolverConfig: tol must be positive");
    if (max_iter < 1) throw ValueError("SolverConfig: max_iter must be >= 1");
  }
};

struct MareSolution {
  SolveVerdict verdict = SolveVerdict::MaxIterReached;
  SymMatrix fixed_point;             ///< last iterate; the fixed point on convergence
  std::optional<GainMatrix> gain;    ///< optimal gain, attached on convergence
  std::size_t iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
};

namespace detail {

/// Copy of K with the columns of channels outside `mask` zeroed; equals
/// K N_I for the diagonal selection matrix of the mask.
inline Matrix masked_columns(const Matrix& k, std::uint32_t mask) {
  Matrix out = k;
  for (std::size_t j = 0; j < k.cols(); ++j)
    if (((mask >> j) & 1u) == 0)
      for (std::size_t i = 0; i < k.rows(); ++i) out(i, j) = 0.0;
  return out;
}

/// Equilibrated Cholesky factor of the curvature matrix: D M D = L Lᵀ with
/// D = diag(1/sqrt(M_jj)).  The per-channel scaling keeps the positive
/// definiteness verdict meaningful when channels live at very different
/// magnitudes (a diverging iterate can blow one mode up by many orders
/// while the rest stay O(1)).
struct CurvatureFactor {
  Matrix lower;
  std::vector<double> scale;
};

[[noreturn]] inline void throw_singular_curvature(std::size_t pivot) {
  throw SingularCurvature(
      "masked curvature matrix is singular (pivot " + std::to_string(pivot) +
      "); ensure U > 0 or the value matrix is positive definite, and every "
      "arrival probability is > 0");
}

inline CurvatureFactor curvature_factor_or_throw(const SymMatrix& curvature) {
  const std::size_t m = curvature.dim();
  CurvatureFactor f;
  f.scale.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = curvature(j, j);
    if (!(d > 0.0) || !std::isfinite(d)) throw_singular_curvature(j + 1);
    f.scale[j] = 1.0 / std::sqrt(d);
  }
  Matrix balanced(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      balanced(i, j) = f.scale[i] * curvature(i, j) * f.scale[j];
  CholeskyResult c = cholesky(SymMatrix(balanced));
  if (!c.ok) throw_singular_curvature(c.failed_pivot);
  f.lower = c.lower;
  return f;
}

/// Solves M X = rhs through the equilibrated factor: M⁻¹ = D (DMD)⁻¹ D.
inline Matrix curvature_solve(const CurvatureFactor& f, Matrix rhs) {
  for (std::size_t i = 0; i < rhs.rows(); ++i)
    for (std::size_t j = 0; j < rhs.cols(); ++j) rhs(i, j) *= f.scale[i];
  Matrix x = cholesky_solve(f.lower, rhs);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) *= f.scale[i];
  return x;
}

}  // namespace detail

/// Delivery-weighted curvature of the control cost:
/// M(X) = sum_I w_I N_I (U + Bᵀ X B) N_I.  Entry (i,j) of the sum keeps
/// (U + BᵀXB)(i,j) exactly when both channels delivered.
inline SymMatrix masked_curvature(const PlantModel& p, const SubsetTable& table,
                                  const SymMatrix& x) {
  const Matrix bt = p.B.transpose();
  const Matrix core = p.U.mat() + bt * x.mat() * p.B;
  const std::size_t m = p.input_dim();
  Matrix acc(m, m);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const double w = table.weights[idx];
    if (w == 0.0) continue;
    const std::uint32_t mask = table.masks[idx];
    for (std::size_t i = 0; i < m; ++i) {
      if (((mask >> i) & 1u) == 0) continue;
      for (std::size_t j = 0; j < m; ++j)
        if ((mask >> j) & 1u) acc(i, j) += w * core(i, j);
    }
  }
  return SymMatrix(acc);
}

/// Gain that makes the auxiliary cost stationary at value matrix X:
/// K = -Aᵀ X B N̄ M(X)⁻¹, evaluated through an SPD solve rather than an
/// explicit inverse.
inline GainMatrix optimal_gain(const PlantModel& p, const SubsetTable& table,
                               const SymMatrix& x) {
  const SymMatrix curvature = masked_curvature(p, table, x);
  const detail::CurvatureFactor factor = detail::curvature_factor_or_throw(curvature);
  Matrix g = p.A.transpose() * x.mat() * p.B;  // n x m
  const SymMatrix nbar = mean_mask(table);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) *= nbar(j, j);
  const Matrix kt = detail::curvature_solve(factor, g.transpose());  // M⁻¹ Gᵀ
  return GainMatrix{-1.0 * kt.transpose()};
}

/// Closed-loop factor for one delivery pattern: F_I = Aᵀ + K N_I Bᵀ.
inline Matrix closed_loop_factor(const PlantModel& p, const GainMatrix& gain,
                                 std::uint32_t mask) {
  return p.A.transpose() + detail::masked_columns(gain.K, mask) * p.B.transpose();
}

/// Per-pattern cost offset: V_I = W + K N_I U N_I Kᵀ.
inline SymMatrix cost_inflation(const PlantModel& p, const GainMatrix& gain,
                                std::uint32_t mask) {
  const Matrix km = detail::masked_columns(gain.K, mask);
  return SymMatrix(p.W.mat() + km * p.U.mat() * km.transpose());
}

/// Auxiliary cost operator: phi(K, X) = sum_I w_I (F_I X F_Iᵀ + V_I).
/// Affine in X for fixed K; PSD whenever X, U, W are.
inline SymMatrix phi(const PlantModel& p, const SubsetTable& table,
                     const GainMatrix& gain, const SymMatrix& x) {
  const std::size_t n = p.state_dim();
  const Matrix at = p.A.transpose();
  const Matrix bt = p.B.transpose();
  Matrix acc(n, n);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const double w = table.weights[idx];
    if (w == 0.0) continue;
    const Matrix km = detail::masked_columns(gain.K, table.masks[idx]);
    const Matrix f = at + km * bt;
    acc += w * (f * x.mat() * f.transpose());
    acc += w * (km * p.U.mat() * km.transpose());
  }
  acc += p.W.mat();  // the W term carries total weight 1
  return SymMatrix(acc);
}

/// One step of the delivery-weighted Riccati map:
/// S' = Aᵀ S A + W - Aᵀ S B N̄ M(S)⁻¹ N̄ Bᵀ S A.
inline SymMatrix mare_step(const PlantModel& p, const SubsetTable& table,
                           const SymMatrix& s) {
  const SymMatrix curvature = masked_curvature(p, table, s);
  const detail::CurvatureFactor factor = detail::curvature_factor_or_throw(curvature);
  Matrix g = p.A.transpose() * s.mat() * p.B;  // n x m
  const SymMatrix nbar = mean_mask(table);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) *= nbar(j, j);
  const Matrix correction = g * detail::curvature_solve(factor, g.transpose());
  const Matrix next =
      p.A.transpose() * s.mat() * p.A + p.W.mat() - correction;
  return SymMatrix(next);
}

/// The minimized auxiliary cost.  Identical to mare_step by stationarity
/// of the gain; kept as a named alias so minimization properties read as
/// stated.
inline SymMatrix g_step(const PlantModel& p, const SubsetTable& table,
                        const SymMatrix& s) {
  return mare_step(p, table, s);
}

/// Plain fixed-point iteration of the Riccati map from cfg.initial
/// (default zero).  Convergence and divergence are both judged on
/// Frobenius norms relative to max(1, ‖S_k‖_F); iterates are
/// re-symmetrized every step.
inline MareSolution solve_mare(const PlantModel& p, const SolverConfig& cfg = {}) {
  p.validate();
  cfg.validate();
  const std::size_t n = p.state_dim();
  const SubsetTable table = eta_squared(p.channels);

  SymMatrix s = cfg.initial.value_or(SymMatrix(n));
  if (s.dim() != n)
    throw DimensionError("solve_mare: initial iterate is " +
                         std::to_string(s.dim()) + "-dimensional, expected " +
                         std::to_string(n));
  const double divergence =
      cfg.divergence_threshold > 0.0
          ? cfg.divergence_threshold
          : 1e12 * std::max(1.0, frobenius_norm(p.W));

  MareSolution sol;
  sol.residual_history.reserve(std::min<std::size_t>(cfg.max_iter, 4096));
  for (std::size_t k = 0; k < cfg.max_iter; ++k) {
    SymMatrix next;
    try {
      next = mare_step(p, table, s);
    } catch (const SingularCurvature& e) {
      if (k == 0)
        throw SingularCurvature(std::string(e.what()) +
                                " (at the first step: choose S0 > 0 or U > 0)");
      throw;
    }
    sol.iterations = k + 1;
    if (!is_finite(next)) {
      sol.verdict = SolveVerdict::Diverged;
      sol.fixed_point = next;
      sol.final_residual = std::numeric_limits<double>::infinity();
      sol.residual_history.push_back(sol.final_residual);
      return sol;
    }
    const double res =
        frobenius_norm(next - s) / std::max(1.0, frobenius_norm(s));
    sol.residual_history.push_back(res);
    sol.final_residual = res;
    if (frobenius_norm(next) > divergence) {
      sol.verdict = SolveVerdict::Diverged;
      sol.fixed_point = next;
      return sol;
    }
    s = next;
    if (res <= cfg.tol) {
      sol.verdict = SolveVerdict::Converged;
      sol.fixed_point = s;
      sol.gain = optimal_gain(p, table, s);
      return sol;
    }
  }
  sol.verdict = SolveVerdict::MaxIterReached;
  sol.fixed_point = s;
  return sol;
}

}  // namespace mare
