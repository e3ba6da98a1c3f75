#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mare/riccati.hpp"
#include "mare/stability.hpp"

namespace mare {

struct SweepProbe {
  double t = 0.0;
  SolveVerdict verdict = SolveVerdict::MaxIterReached;
  std::size_t iterations = 0;
  double final_residual = 0.0;
};

struct SweepResult {
  bool crossing = false;
  double boundary = 0.0;       ///< midpoint of the final bracket
  double converged_end = 0.0;  ///< bracket end where the solve converged
  double diverged_end = 0.0;   ///< bracket end where it did not
  std::vector<SweepProbe> probes;
  std::optional<SpectralRadius> rho_at_boundary;  ///< at the converged end's gain
};

namespace detail {

inline PlantModel scaled_arrivals(const PlantModel& base,
                                  const std::vector<double>& ray, double t) {
  PlantModel p = base;
  for (std::size_t i = 0; i < ray.size(); ++i)
    p.channels.nu_bar[i] = t * ray[i];
  return p;
}

}  // namespace detail

/// Bisects the arrival-probability scale between a bounded and an
/// unbounded solver verdict along nu_bar(t) = t * ray.  The solver verdict
/// is the predicate -- probes that hit the iteration cap count as
/// non-converged and are recorded as such.  A spectral-radius reading at
/// the converged end is attached when the crossing is found.
inline SweepResult sweep_boundary(const PlantModel& base,
                                  const std::vector<double>& ray, double lo,
                                  double hi, double tol = 1e-3,
                                  const SolverConfig& cfg = {}) {
  if (ray.size() != base.input_dim())
    throw ValueError("sweep_boundary: ray has " + std::to_string(ray.size()) +
                     " entries, expected " + std::to_string(base.input_dim()));
  for (std::size_t i = 0; i < ray.size(); ++i)
    if (!(ray[i] > 0.0) || ray[i] > 1.0)
      throw ValueError("sweep_boundary: ray entry " + std::to_string(i + 1) +
                       " must lie in (0, 1]");
  if (!(lo < hi)) throw ValueError("sweep_boundary: need lo < hi");
  if (!(tol > 0.0)) throw ValueError("sweep_boundary: tol must be positive");
  for (std::size_t i = 0; i < ray.size(); ++i) {
    if (!(lo * ray[i] > 0.0))
      throw ValueError("sweep_boundary: lo scales channel " +
                       std::to_string(i + 1) + " to a non-positive probability");
    if (hi * ray[i] > 1.0)
      throw ValueError("sweep_boundary: hi scales channel " +
                       std::to_string(i + 1) + " beyond probability 1");
  }

  SweepResult result;
  auto probe = [&](double t) {
    const MareSolution sol = solve_mare(detail::scaled_arrivals(base, ray, t), cfg);
    result.probes.push_back(
        SweepProbe{t, sol.verdict, sol.iterations, sol.final_residual});
    return sol.verdict == SolveVerdict::Converged;
  };

  bool lo_conv = probe(lo);
  bool hi_conv = probe(hi);
  if (lo_conv == hi_conv) {
    result.crossing = false;
    return result;
  }
  double conv_end = lo_conv ? lo : hi;
  double div_end = lo_conv ? hi : lo;
  while (std::abs(conv_end - div_end) > tol) {
    const double mid = 0.5 * (conv_end + div_end);
    if (probe(mid))
      conv_end = mid;
    else
      div_end = mid;
  }
  result.crossing = true;
  result.converged_end = conv_end;
  result.diverged_end = div_end;
  result.boundary = 0.5 * (conv_end + div_end);

  const PlantModel at_conv = detail::scaled_arrivals(base, ray, conv_end);
  const MareSolution sol = solve_mare(at_conv, cfg);
  if (sol.verdict == SolveVerdict::Converged && sol.gain) {
    const SubsetTable table = eta_squared(at_conv.channels);
    result.rho_at_boundary =
        ms_spectral_radius(LyapOperator(at_conv, table, *sol.gain));
  }
  return result;
}

}  // namespace mare
