#pragma once

// Deterministic random problem instances for property tests.  All draws go
// through a fixed-seed mt19937_64 so failures reproduce exactly.

#include <cstdint>
#include <random>

#include "mare/channels.hpp"
#include "mare/matrix.hpp"
#include "mare/riccati.hpp"

namespace testgen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive range
    return lo + static_cast<std::size_t>(eng_() % (hi - lo + 1));
  }

 private:
  std::mt19937_64 eng_;
};

inline mare::Matrix matrix(Rng& rng, std::size_t rows, std::size_t cols,
                           double scale = 1.0) {
  mare::Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

inline mare::SymMatrix psd(Rng& rng, std::size_t n, double scale = 1.0) {
  const mare::Matrix r = matrix(rng, n, n, scale);
  return mare::SymMatrix(r.transpose() * r);
}

inline mare::SymMatrix spd(Rng& rng, std::size_t n, double scale = 1.0,
                           double floor = 0.1) {
  mare::SymMatrix s = psd(rng, n, scale);
  s += floor * mare::SymMatrix::identity(n);
  return s;
}

inline mare::ChannelSpec channels(Rng& rng, std::size_t m, double lo = 0.3,
                                  double hi = 1.0) {
  mare::ChannelSpec spec;
  spec.m = m;
  spec.nu_bar.resize(m);
  for (std::size_t i = 0; i < m; ++i) spec.nu_bar[i] = rng.uniform(lo, hi);
  return spec;
}

inline mare::PlantModel scalar_plant(double a, double b, double u, double w,
                                     double nu) {
  mare::PlantModel p;
  p.A = mare::Matrix{{a}};
  p.B = mare::Matrix{{b}};
  p.U = mare::SymMatrix(mare::Matrix{{u}});
  p.W = mare::SymMatrix(mare::Matrix{{w}});
  p.channels = mare::ChannelSpec{1, {nu}};
  return p;
}

struct PlantOptions {
  double a_scale = 1.0;
  double nu_lo = 0.3;
  double nu_hi = 1.0;
  double weight_floor = 0.1;  ///< smallest eigenvalue offset of U and W
};

inline mare::PlantModel plant(Rng& rng, std::size_t n, std::size_t m,
                              const PlantOptions& opt = {}) {
  mare::PlantModel p;
  p.A = matrix(rng, n, n, opt.a_scale);
  p.B = matrix(rng, n, m, 1.0);
  p.U = spd(rng, m, 1.0, opt.weight_floor);
  p.W = spd(rng, n, 1.0, opt.weight_floor);
  p.channels = channels(rng, m, opt.nu_lo, opt.nu_hi);
  return p;
}

}  // namespace testgen
