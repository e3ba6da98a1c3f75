#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"
#include "mare/riccati.hpp"

namespace mare {

/// Feasibility certificate in the inverse variables Y = S⁻¹, Z = S⁻¹K.
struct LmiCertificate {
  SymMatrix Y;
  Matrix Z;
  double delta = 0.0;             ///< inflation margin applied to the fixed point
  double min_pivot = 0.0;         ///< smallest Cholesky pivot of the block matrix
  bool feasible = false;
  double w_regularization = 0.0;  ///< epsilon added to W before certification, 0 if none
};

namespace detail {

/// Denman-Beavers iteration on an SPD matrix; returns {sqrt, inverse sqrt}.
inline std::pair<Matrix, Matrix> denman_beavers(const SymMatrix& m) {
  const std::size_t n = m.dim();
  Matrix y = m.mat();
  Matrix z = Matrix::identity(n);
  const Matrix eye = Matrix::identity(n);
  for (int it = 0; it < 100; ++it) {
    const Matrix y_inv = solve_spd(SymMatrix(y), eye);
    const Matrix z_inv = solve_spd(SymMatrix(z), eye);
    const Matrix y_next = 0.5 * (y + z_inv);
    const Matrix z_next = 0.5 * (z + y_inv);
    const double step = frobenius_norm(y_next - y);
    y = y_next;
    z = z_next;
    if (step <= 1e-15 * std::max(1.0, frobenius_norm(y))) break;
  }
  return {y, z};
}

}  // namespace detail

/// Principal square root of a PSD matrix.  Diagonal inputs take the
/// entrywise shortcut.  Otherwise the matrix is factored as L Lᵀ with the
/// null columns dropped and the root assembled as L (LᵀL)^{-1/2} Lᵀ, so the
/// Denman-Beavers iteration only ever runs on a full-rank SPD block and
/// rank deficiency costs no accuracy.
inline SymMatrix sqrt_psd(const SymMatrix& u) {
  const std::size_t n = u.dim();
  if (!is_finite(u)) throw ValueError("sqrt_psd: non-finite entries");
  const double scale = std::max(1.0, frobenius_norm(u));

  bool diagonal = true;
  for (std::size_t i = 0; i < n && diagonal; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(i, j) != 0.0) {
        diagonal = false;
        break;
      }
  if (diagonal) {
    SymMatrix r(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = u(i, i);
      if (d < -1e-10 * scale)
        throw ValueError("sqrt_psd: diagonal entry " + std::to_string(i + 1) +
                         " is negative");
      r.set(i, i, d > 0.0 ? std::sqrt(d) : 0.0);
    }
    return r;
  }

  const Matrix full = psd_factor(u);
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < n; ++j)
    if (full(j, j) != 0.0) kept.push_back(j);
  if (kept.empty()) return SymMatrix(n);

  Matrix l(n, kept.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kept.size(); ++c) l(i, c) = full(i, kept[c]);

  const SymMatrix gram(l.transpose() * l);  // full-rank SPD
  const Matrix inv_root = detail::denman_beavers(gram).second;
  SymMatrix root(l * inv_root * l.transpose());
  if (frobenius_norm(SymMatrix(root.mat() * root.mat()) - u) >
      1e-10 * std::max(1.0, frobenius_norm(u)))
    throw Error("sqrt_psd: square-root iteration did not reach tolerance");
  return root;
}

namespace detail {

inline void place_block(Matrix& big, std::size_t r0, std::size_t c0,
                        const Matrix& block) {
  for (std::size_t i = 0; i < block.rows(); ++i)
    for (std::size_t j = 0; j < block.cols(); ++j) {
      big(r0 + i, c0 + j) = block(i, j);
      big(c0 + j, r0 + i) = block(i, j);
    }
}

}  // namespace detail

/// Assembles the feasibility block matrix in the (Y, Z) variables.
///
/// Layout (all blocks not listed are zero):
///   row/col 0: Y, coupled to the W⁻¹ block by an off-diagonal Y and, for
///   every delivery pattern I in table order, to a pair of diagonal blocks
///     [ Y ]  via  eta_I (Y Aᵀ + Z N_I Bᵀ)        (n x n)
///     [ I ]  via  eta_I  Z N_I U^{1/2}           (n x m)
/// Total dimension: n + n + 2^m (n + m).  The matrix is PD exactly when
/// S = Y⁻¹, K = Y⁻¹Z satisfy S > 0 and S > phi(K, S).
inline SymMatrix assemble_lmi(const PlantModel& p, const SubsetTable& table,
                              const SymMatrix& y, const Matrix& z) {
  const std::size_t n = p.state_dim();
  const std::size_t m = p.input_dim();
  if (y.dim() != n)
    throw DimensionError("assemble_lmi: Y must be " + std::to_string(n) +
                         "-dimensional");
  if (z.rows() != n || z.cols() != m)
    throw DimensionError("assemble_lmi: Z must be " + std::to_string(n) + "x" +
                         std::to_string(m));

  Matrix w_inv;
  try {
    w_inv = solve_spd(p.W, Matrix::identity(n));
  } catch (const NotPositiveDefinite&) {
    throw Error(
        "assemble_lmi: W is not positive definite, so its inverse block does "
        "not exist; regularize W (e.g. W + eps*I) or supply W > 0");
  }
  const SymMatrix u_sqrt = sqrt_psd(p.U);

  const std::size_t total = 2 * n + table.size() * (n + m);
  Matrix big(total, total);
  const Matrix bt = p.B.transpose();
  const Matrix y_at = y.mat() * p.A.transpose();

  detail::place_block(big, 0, 0, y.mat());
  detail::place_block(big, 0, n, y.mat());
  detail::place_block(big, n, n, w_inv);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const double eta = std::sqrt(table.weights[idx]);
    const Matrix z_masked = detail::masked_columns(z, table.masks[idx]);
    const std::size_t s_off = 2 * n + idx * (n + m);
    const std::size_t t_off = s_off + n;
    detail::place_block(big, 0, s_off, eta * (y_at + z_masked * bt));
    detail::place_block(big, s_off, s_off, y.mat());
    detail::place_block(big, 0, t_off, eta * (z_masked * u_sqrt.mat()));
    detail::place_block(big, t_off, t_off, Matrix::identity(m));
  }
  return SymMatrix(big);
}

struct LmiCheck {
  bool feasible = false;
  double min_pivot = 0.0;  ///< smallest Cholesky pivot of the equilibrated matrix
};

/// Cholesky verdict on the assembled block matrix, relative pivot
/// tolerance 1e-10.  The matrix is Jacobi-equilibrated first (congruence
/// with diag(1/sqrt(M_jj)), which preserves definiteness exactly): the
/// blocks can differ in scale by many orders, e.g. W⁻¹ after a 1e-9
/// regularization against a unit Y block, and an unequilibrated relative
/// pivot threshold would reject legitimate pivots on the small blocks.
inline LmiCheck check_lmi(const PlantModel& p, const SubsetTable& table,
                          const SymMatrix& y, const Matrix& z) {
  const SymMatrix big = assemble_lmi(p, table, y, z);
  const std::size_t total = big.dim();
  std::vector<double> scale(total, 1.0);
  for (std::size_t j = 0; j < total; ++j)
    if (big(j, j) > 0.0) scale[j] = 1.0 / std::sqrt(big(j, j));
  Matrix balanced(total, total);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = 0; j < total; ++j)
      balanced(i, j) = scale[i] * big(i, j) * scale[j];
  const CholeskyResult c = cholesky(SymMatrix(balanced), 1e-10);
  return LmiCheck{c.ok, c.min_pivot};
}

/// Plant with W replaced by W + eps*I, eps = 1e-9 * max(1, tr(W)/n).
/// Used when W is PSD-singular and its inverse block would not exist.
struct RegularizedPlant {
  PlantModel plant;
  double epsilon = 0.0;
};

inline RegularizedPlant regularize_state_weight(const PlantModel& p) {
  const std::size_t n = p.state_dim();
  RegularizedPlant out{p, 1e-9 * std::max(1.0, trace(p.W) / static_cast<double>(n))};
  out.plant.W += out.epsilon * SymMatrix::identity(n);
  return out;
}

/// Builds a certificate from a converged solve.  The fixed point satisfies
/// the defining inequality with equality, so S is inflated to (1+delta)·S̄;
/// affineness of the cost operator in its value argument turns the slack
/// into delta·(W + sum_I w_I K N_I U N_I Kᵀ), strictly PD whenever W is.
inline LmiCertificate certificate_from_solution(const PlantModel& p,
                                                const SubsetTable& table,
                                                const MareSolution& sol,
                                                double delta = 1e-6) {
  if (sol.verdict != SolveVerdict::Converged || !sol.gain)
    throw Error(
        "certificate_from_solution: solve did not converge, no certificate "
        "can be built from this pipeline");
  if (delta < 0.0) throw ValueError("certificate_from_solution: delta must be >= 0");
  if (!cholesky(p.W).ok)
    throw Error(
        "certificate_from_solution: W is not positive definite; enable "
        "regularization or supply W > 0");

  const std::size_t n = p.state_dim();
  const SymMatrix s = (1.0 + delta) * sol.fixed_point;
  Matrix s_inv;
  try {
    s_inv = solve_spd(s, Matrix::identity(n));
  } catch (const NotPositiveDefinite&) {
    throw Error(
        "certificate_from_solution: inflated fixed point is not positive "
        "definite; the solution cannot be inverted into certificate variables");
  }
  LmiCertificate cert;
  cert.Y = SymMatrix(s_inv);
  cert.Z = solve_spd(s, sol.gain->K);
  cert.delta = delta;
  const LmiCheck chk = check_lmi(p, table, cert.Y, cert.Z);
  cert.feasible = chk.feasible;
  cert.min_pivot = chk.min_pivot;
  return cert;
}

}  // namespace mare
