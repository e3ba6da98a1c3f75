#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mare/matrix.hpp"

namespace mare {

/// Independent actuation channels with per-channel arrival probabilities.
struct ChannelSpec {
  std::size_t m = 0;            ///< channel count
  std::vector<double> nu_bar;   ///< arrival probability per channel, in (0, 1]

  void validate() const {
    if (m < 1) throw ValueError("ChannelSpec: need at least one channel");
    if (nu_bar.size() != m)
      throw ValueError("ChannelSpec: nu_bar has " + std::to_string(nu_bar.size()) +
                       " entries, expected " + std::to_string(m));
    for (std::size_t i = 0; i < m; ++i) {
      const double nu = nu_bar[i];
      if (!(nu > 0.0) || nu > 1.0 || !std::isfinite(nu)) {
        if (nu == 0.0)
          throw ValueError(
              "ChannelSpec: channel " + std::to_string(i + 1) +
              " has arrival probability 0; a channel that never delivers makes "
              "the gain update singular -- delete it instead (drop column " +
              std::to_string(i + 1) + " of B)");
        throw ValueError("ChannelSpec: arrival probability of channel " +
                         std::to_string(i + 1) + " must lie in (0, 1], got " +
                         std::to_string(nu));
      }
    }
  }
};

/// All subsets of {1..m} in binary counting order: bit (i-1) of the mask is
/// set exactly when channel i belongs to the subset, so the empty set comes
/// first and the full set last.
inline std::vector<std::uint32_t> enumerate_subsets(std::size_t m) {
  if (m < 1 || m > 30)
    throw ValueError("enumerate_subsets: channel count must be in [1, 30], got " +
                     std::to_string(m));
  const std::uint32_t count = std::uint32_t{1} << m;
  std::vector<std::uint32_t> masks(count);
  for (std::uint32_t i = 0; i < count; ++i) masks[i] = i;
  return masks;
}

/// Enumeration of all channel subsets together with their delivery
/// probabilities.  The weights form a probability distribution: they sum
/// to 1 and their selection-weighted sum is diag(nu_bar).
struct SubsetTable {
  std::size_t m = 0;
  std::vector<std::uint32_t> masks;  ///< binary counting order
  std::vector<double> weights;       ///< delivery probability of each subset

  std::size_t size() const { return masks.size(); }
};

/// Probability that exactly the channels in `mask` deliver:
/// prod_{i in I} nu_i * prod_{i not in I} (1 - nu_i).  Computed in
/// log-space for m > 20 where the direct product can underflow.
inline SubsetTable eta_squared(const ChannelSpec& spec) {
  spec.validate();
  SubsetTable table;
  table.m = spec.m;
  table.masks = enumerate_subsets(spec.m);
  table.weights.resize(table.masks.size());

  const bool log_space = spec.m > 20;
  for (std::size_t idx = 0; idx < table.masks.size(); ++idx) {
    const std::uint32_t mask = table.masks[idx];
    if (log_space) {
      double log_w = 0.0;
      for (std::size_t i = 0; i < spec.m; ++i)
        log_w += (mask >> i) & 1u ? std::log(spec.nu_bar[i])
                                  : std::log1p(-spec.nu_bar[i]);
      table.weights[idx] = std::exp(log_w);
    } else {
      double w = 1.0;
      for (std::size_t i = 0; i < spec.m; ++i)
        w *= (mask >> i) & 1u ? spec.nu_bar[i] : 1.0 - spec.nu_bar[i];
      table.weights[idx] = w;
    }
  }
  return table;
}

/// Diagonal 0/1 matrix selecting the channels in `mask`.
inline SymMatrix selection_matrix(std::uint32_t mask, std::size_t m) {
  if (m < 1 || m > 30 || (mask >> m) != 0)
    throw ValueError("selection_matrix: mask out of range for " +
                     std::to_string(m) + " channels");
  SymMatrix n(m);
  for (std::size_t i = 0; i < m; ++i)
    if ((mask >> i) & 1u) n.set(i, i, 1.0);
  return n;
}

/// Weighted sum of the selection matrices; equals diag(nu_bar) up to
/// rounding because each channel's subsets weights sum to its arrival
/// probability.
inline SymMatrix mean_mask(const SubsetTable& table) {
  std::vector<double> diag(table.m, 0.0);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const std::uint32_t mask = table.masks[idx];
    const double w = table.weights[idx];
    for (std::size_t i = 0; i < table.m; ++i)
      if ((mask >> i) & 1u) diag[i] += w;
  }
  return SymMatrix::diagonal(diag);
}

}  // namespace mare
