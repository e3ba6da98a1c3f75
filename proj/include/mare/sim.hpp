#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"
#include "mare/riccati.hpp"
#include "mare/stability.hpp"

namespace mare {

/// Counter-based seed derivation: a 64-bit avalanche mix of the master
/// seed and the trial index.  Pure arithmetic on fixed-width integers, so
/// the value is identical on every platform and independent of execution
/// order; distinct indices under the same master never collide (the mix is
/// a bijection of distinct inputs).
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

struct SimConfig {
  std::size_t steps = 1000;   ///< steps per trial
  std::size_t trials = 100;
  std::uint64_t master_seed = 0;
  std::optional<SymMatrix> process_noise;  ///< n x n PSD covariance; empty = no noise
  std::optional<std::size_t> burn_in;      ///< discarded prefix; default steps/10

  std::size_t effective_burn_in() const { return burn_in.value_or(steps / 10); }

  void validate(std::size_t n) const {
    if (trials < 1) throw ValueError("SimConfig: need at least one trial");
    if (steps <= effective_burn_in())
      throw ValueError("SimConfig: steps must exceed the burn-in length");
    if (process_noise && process_noise->dim() != n)
      throw DimensionError("SimConfig: process noise is " +
                           std::to_string(process_noise->dim()) +
                           "-dimensional, expected " + std::to_string(n));
  }
};

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double avg_cost = 0.0;
  double cov_trace = 0.0;
  bool finite = true;
};

struct SimResult {
  SymMatrix covariance;   ///< empirical steady-state second moment
  double avg_cost = 0.0;  ///< empirical average stage cost
  std::size_t trials_used = 0;
  std::uint64_t master_seed = 0;
  std::vector<TrialRecord> trials;

  std::size_t effective_samples(const SimConfig& cfg) const {
    return trials_used * (cfg.steps - cfg.effective_burn_in());
  }
};

namespace detail {

/// Deterministic per-trial random stream.  The engine's raw 64-bit output
/// is fully specified by the standard; uniforms and normals are derived by
/// hand so the draw sequence is identical across platforms.
class TrialRng {
 public:
  explicit TrialRng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in (0, 1].
  double uniform01() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() <= p; }

  /// Box-Muller; consumes exactly two uniforms per call.
  double gaussian() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

inline void mat_vec(const Matrix& m, const std::vector<double>& x,
                    std::vector<double>& out) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    out[i] = s;
  }
}

inline double quad_form(const Matrix& m, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) row += m(i, j) * x[j];
    s += x[i] * row;
  }
  return s;
}

}  // namespace detail

/// Closed-loop Monte-Carlo rollout: x_{k+1} = (A + B D_k Kᵀ) x_k + w_k with
/// D_k a diagonal of independent per-channel Bernoulli draws, resampled
/// every step, and w_k ~ N(0, Q).  The stage cost is
/// xᵀW x + uᵀ D U D u with u = Kᵀx, whose expectation over D reproduces the
/// delivery-masked control weight.  Per trial: x_0 ~ N(0, I); the draw
/// order is x_0, then per step m channel draws followed by the noise
/// vector.  Trials run and aggregate in index order, so results are
/// bit-identical for a fixed config.  Trials that leave the finite range
/// are excluded and counted.
inline SimResult simulate(const PlantModel& p, const GainMatrix& gain,
                          const SimConfig& cfg) {
  p.validate();
  const std::size_t n = p.state_dim();
  const std::size_t m = p.input_dim();
  cfg.validate(n);
  if (gain.K.rows() != n || gain.K.cols() != m)
    throw DimensionError("simulate: gain must be " + std::to_string(n) + "x" +
                         std::to_string(m));
  if (!is_finite(gain.K)) throw ValueError("simulate: gain has non-finite entries");

  const bool has_noise =
      cfg.process_noise && frobenius_norm(*cfg.process_noise) > 0.0;
  Matrix noise_factor;
  if (has_noise) noise_factor = psd_factor(*cfg.process_noise);

  const std::size_t burn = cfg.effective_burn_in();
  const std::size_t samples = cfg.steps - burn;
  const Matrix kt = gain.K.transpose();

  SimResult result;
  result.master_seed = cfg.master_seed;
  result.trials.reserve(cfg.trials);
  Matrix cov_sum(n, n);
  double cost_sum = 0.0;

  std::vector<double> x(n), u(m), bu(n), ax(n), z(n), wn(n);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    TrialRecord rec;
    rec.index = t;
    rec.seed = trial_seed(cfg.master_seed, t);
    detail::TrialRng rng(rec.seed);

    for (std::size_t i = 0; i < n; ++i) x[i] = rng.gaussian();
    Matrix trial_cov(n, n);
    double trial_cost = 0.0;

    for (std::size_t k = 0; k < cfg.steps; ++k) {
      detail::mat_vec(kt, x, u);
      for (std::size_t i = 0; i < m; ++i)
        if (!rng.bernoulli(p.channels.nu_bar[i])) u[i] = 0.0;  // dropped channel

      if (k >= burn) {
        trial_cost += detail::quad_form(p.W.mat(), x) + detail::quad_form(p.U.mat(), u);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) trial_cov(i, j) += x[i] * x[j];
      }

      detail::mat_vec(p.A, x, ax);
      detail::mat_vec(p.B, u, bu);
      if (has_noise) {
        for (std::size_t i = 0; i < n; ++i) z[i] = rng.gaussian();
        detail::mat_vec(noise_factor, z, wn);
      }
      bool finite = true;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = ax[i] + bu[i] + (has_noise ? wn[i] : 0.0);
        finite = finite && std::isfinite(x[i]);
      }
      if (!finite) {
        rec.finite = false;
        break;
      }
    }

    if (rec.finite) {
      trial_cov *= 1.0 / static_cast<double>(samples);
      trial_cost /= static_cast<double>(samples);
      rec.avg_cost = trial_cost;
      rec.cov_trace = trace(trial_cov);
      cov_sum += trial_cov;
      cost_sum += trial_cost;
      ++result.trials_used;
    }
    result.trials.push_back(rec);
  }

  if (result.trials_used > 0) {
    result.covariance =
        SymMatrix(cov_sum * (1.0 / static_cast<double>(result.trials_used)));
    result.avg_cost = cost_sum / static_cast<double>(result.trials_used);
  } else {
    result.covariance = SymMatrix(n);
  }
  return result;
}

struct CovarianceFixedPoint {
  LyapVerdict verdict = LyapVerdict::Indeterminate;
  SymMatrix covariance;
  double expected_cost = 0.0;  ///< tr((W + K M_u Kᵀ) Σ) at the fixed point
  std::size_t iterations = 0;
};

/// Analytic steady-state second moment: fixed point of
/// Σ -> sum_I w_I G_I Σ G_Iᵀ + Q with G_I = A + B N_I Kᵀ (the transpose of
/// the closed-loop factor).  Serves as the oracle the simulator is checked
/// against.  Unbounded when the iterates blow past 1e12 * max(1, ‖Q‖_F).
inline CovarianceFixedPoint covariance_fixed_point(const PlantModel& p,
                                                   const SubsetTable& table,
                                                   const GainMatrix& gain,
                                                   const SymMatrix& q_noise,
                                                   std::size_t max_iter = 200000) {
  const std::size_t n = p.state_dim();
  if (q_noise.dim() != n)
    throw DimensionError("covariance_fixed_point: noise covariance dimension mismatch");

  std::vector<Matrix> g;
  g.reserve(table.size());
  for (std::size_t idx = 0; idx < table.size(); ++idx)
    g.push_back(closed_loop_factor(p, gain, table.masks[idx]).transpose());

  const double bound = 1e12 * std::max(1.0, frobenius_norm(q_noise));
  CovarianceFixedPoint out;
  SymMatrix sigma(n);
  for (std::size_t k = 0; k < max_iter; ++k) {
    Matrix acc(n, n);
    for (std::size_t idx = 0; idx < table.size(); ++idx) {
      const double w = table.weights[idx];
      if (w == 0.0) continue;
      acc += w * (g[idx] * sigma.mat() * g[idx].transpose());
    }
    const SymMatrix next = SymMatrix(acc) + q_noise;
    out.iterations = k + 1;
    if (!is_finite(next) || frobenius_norm(next) > bound) {
      out.verdict = LyapVerdict::Unbounded;
      return out;
    }
    const double res =
        frobenius_norm(next - sigma) / std::max(1.0, frobenius_norm(sigma));
    sigma = next;
    if (res <= 1e-12) {
      out.verdict = LyapVerdict::Bounded;
      break;
    }
  }
  if (out.verdict != LyapVerdict::Bounded) {
    out.covariance = sigma;
    return out;
  }

  out.covariance = sigma;
  const SymMatrix masked_u = masked_curvature(p, table, SymMatrix(n));
  const Matrix cost_weight =
      p.W.mat() + gain.K * masked_u.mat() * gain.K.transpose();
  out.expected_cost = trace(cost_weight * sigma.mat());
  return out;
}

}  // namespace mare
