#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "mare/sweep.hpp"
#include "support/random_instances.hpp"

using mare::Matrix;
using mare::PlantModel;
using mare::SymMatrix;

namespace {

PlantModel two_state_plant() {
  PlantModel p;
  p.A = Matrix{{2.0, 0.0}, {0.0, 0.5}};
  p.B = Matrix::identity(2);
  p.U = SymMatrix(Matrix(2, 2));
  p.W = SymMatrix::identity(2);
  p.channels = mare::ChannelSpec{2, {0.9, 0.9}};  // replaced by the sweep
  return p;
}

}  // namespace

TEST_CASE("scalar sweep recovers the critical probability") {
  const PlantModel p = testgen::scalar_plant(2.0, 1.0, 0.0, 1.0, 0.8);
  mare::SolverConfig cfg;
  cfg.initial = SymMatrix::identity(1);
  cfg.tol = 1e-10;
  cfg.max_iter = 200000;
  const mare::SweepResult res = mare::sweep_boundary(p, {1.0}, 0.1, 1.0, 1e-3, cfg);
  REQUIRE(res.crossing);
  CHECK(std::abs(res.boundary - 0.75) <= 1e-3);
  REQUIRE(res.rho_at_boundary.has_value());
  CHECK(res.rho_at_boundary->value < 1.0);
  CHECK(res.probes.size() >= 8);
}

TEST_CASE("two-channel sweep matches a brute grid scan") {
  // decoupled states: only the a = 2 mode constrains delivery, so the
  // uniform-ray boundary sits at the scalar critical probability
  const PlantModel p = two_state_plant();
  mare::SolverConfig cfg;
  cfg.initial = SymMatrix::identity(2);
  cfg.tol = 1e-9;
  cfg.max_iter = 100000;

  const mare::SweepResult res =
      mare::sweep_boundary(p, {1.0, 1.0}, 0.5, 1.0, 1e-3, cfg);
  REQUIRE(res.crossing);

  double grid_boundary = -1.0;
  for (double t = 0.50; t <= 1.0; t += 0.01) {
    PlantModel probe = p;
    probe.channels.nu_bar = {t, t};
    if (mare::solve_mare(probe, cfg).verdict == mare::SolveVerdict::Converged) {
      grid_boundary = t;
      break;
    }
  }
  REQUIRE(grid_boundary > 0.0);
  CHECK(std::abs(res.boundary - grid_boundary) <= 0.01 + 1e-3);
  CHECK(std::abs(res.boundary - 0.75) <= 2e-3);
}

TEST_CASE("no crossing is reported when both ends agree") {
  const PlantModel p = testgen::scalar_plant(0.5, 1.0, 0.0, 1.0, 0.5);
  mare::SolverConfig cfg;
  cfg.initial = SymMatrix::identity(1);
  const mare::SweepResult res = mare::sweep_boundary(p, {1.0}, 0.1, 1.0, 1e-3, cfg);
  CHECK_FALSE(res.crossing);
  CHECK(res.probes.size() == 2);
}

TEST_CASE("sweep validates its inputs") {
  const PlantModel p = testgen::scalar_plant(2.0, 1.0, 0.0, 1.0, 0.8);
  CHECK_THROWS_AS(mare::sweep_boundary(p, {1.0, 1.0}, 0.1, 1.0), mare::ValueError);
  CHECK_THROWS_AS(mare::sweep_boundary(p, {1.5}, 0.1, 1.0), mare::ValueError);
  CHECK_THROWS_AS(mare::sweep_boundary(p, {1.0}, 0.9, 0.5), mare::ValueError);
  CHECK_THROWS_AS(mare::sweep_boundary(p, {1.0}, 0.1, 1.5), mare::ValueError);
}
