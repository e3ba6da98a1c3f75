#include <cmath>
#include <cstddef>

#include "catch_amalgamated.hpp"
#include "mare/lmi.hpp"
#include "support/oracles.hpp"
#include "support/random_instances.hpp"

using mare::GainMatrix;
using mare::Matrix;
using mare::PlantModel;
using mare::SubsetTable;
using mare::SymMatrix;

TEST_CASE("sqrt_psd takes roots of diagonal and dense matrices") {
  const SymMatrix d = mare::sqrt_psd(SymMatrix::diagonal({4.0, 9.0, 0.0}));
  CHECK(d(0, 0) == 2.0);
  CHECK(d(1, 1) == 3.0);
  CHECK(d(2, 2) == 0.0);

  testgen::Rng rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix u = testgen::spd(rng, 3);
    const SymMatrix r = mare::sqrt_psd(u);
    CHECK(mare::frobenius_norm(SymMatrix(r.mat() * r.mat()) - u) <=
          1e-10 * std::max(1.0, mare::frobenius_norm(u)));
  }

  // rank-deficient dense PSD input
  const Matrix v{{1.0}, {2.0}};
  const SymMatrix singular(v * v.transpose());
  const SymMatrix r = mare::sqrt_psd(singular);
  CHECK(mare::frobenius_norm(SymMatrix(r.mat() * r.mat()) - singular) <=
        1e-10 * std::max(1.0, mare::frobenius_norm(singular)));

  CHECK_THROWS_AS(mare::sqrt_psd(SymMatrix::diagonal({1.0, -1.0})), mare::ValueError);
}

TEST_CASE("assembled block matrix has the announced dimension") {
  const PlantModel p = testgen::scalar_plant(0.5, 1.0, 1.0, 1.0, 0.5);
  const SubsetTable table = mare::eta_squared(p.channels);
  const SymMatrix big =
      mare::assemble_lmi(p, table, SymMatrix::identity(1), Matrix(1, 1));
  CHECK(big.dim() == 6);  // n + n + 2^m (n + m) with n = m = 1

  testgen::Rng rng(127);
  const PlantModel p2 = testgen::plant(rng, 2, 2);
  const SubsetTable t2 = mare::eta_squared(p2.channels);
  const SymMatrix big2 =
      mare::assemble_lmi(p2, t2, SymMatrix::identity(2), Matrix(2, 2));
  CHECK(big2.dim() == 2 + 2 + 4 * (2 + 2));
}

TEST_CASE("decoupled case reduces to a two-block Schur condition") {
  // with A = 0 and Z = 0 every pattern block decouples, leaving
  // [[Y, Y], [Y, W^-1]] (+ diagonal Y and identity blocks), which is PD
  // exactly when Y > 0 and Y - Y W Y > 0
  testgen::Rng rng(131);
  for (int trial = 0; trial < 20; ++trial) {
    PlantModel p = testgen::plant(rng, 2, 1);
    p.A = Matrix(2, 2);
    const SubsetTable table = mare::eta_squared(p.channels);
    const SymMatrix y = testgen::spd(rng, 2, 1.0, trial % 2 == 0 ? 0.5 : 0.05);

    const auto verdict = mare::check_lmi(p, table, y, Matrix(2, 1));
    const SymMatrix schur(y.mat() - y.mat() * p.W.mat() * y.mat());
    const bool expected =
        oracle::min_eig(y) > 0.0 && oracle::min_eig(schur) > 0.0;
    if (std::abs(oracle::min_eig(schur)) >
        1e-8 * std::max(1.0, mare::frobenius_norm(schur)))
      CHECK(verdict.feasible == expected);
  }
}

TEST_CASE("feasibility check matches the direct inequality") {
  testgen::Rng rng(137);
  int feasible_seen = 0, infeasible_seen = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = rng.index(1, 3), m = rng.index(1, 2);
    const PlantModel p = testgen::plant(rng, n, m, {0.9, 0.4, 1.0, 0.3});
    const SubsetTable table = mare::eta_squared(p.channels);
    const SymMatrix s = testgen::spd(rng, n, 1.0, 0.5);
    const GainMatrix k{testgen::matrix(rng, n, m, 0.7)};

    const SymMatrix slack = s - mare::phi(p, table, k, s);
    const double margin = oracle::min_eig(slack);
    if (std::abs(margin) <= 1e-7 * std::max(1.0, mare::frobenius_norm(slack)))
      continue;  // too close to the boundary to classify either way

    const Matrix s_inv = mare::solve_spd(s, Matrix::identity(n));
    const Matrix z = mare::solve_spd(s, k.K);
    const auto verdict = mare::check_lmi(p, table, SymMatrix(s_inv), z);
    CHECK(verdict.feasible == (margin > 0.0));
    (margin > 0.0 ? feasible_seen : infeasible_seen)++;
  }
  CHECK(feasible_seen >= 3);
  CHECK(infeasible_seen >= 3);
}

TEST_CASE("inflating the fixed point leaves exactly the stage-cost slack") {
  testgen::Rng rng(139);
  int tested = 0;
  for (int trial = 0; trial < 20 && tested < 6; ++trial) {
    const std::size_t n = rng.index(1, 3), m = rng.index(1, 2);
    const PlantModel p = testgen::plant(rng, n, m, {0.8, 0.5, 1.0, 0.3});
    const mare::MareSolution sol = mare::solve_mare(p, {});
    if (sol.verdict != mare::SolveVerdict::Converged) continue;
    ++tested;
    const SubsetTable table = mare::eta_squared(p.channels);

    const double delta = 1e-3;
    const SymMatrix inflated = (1.0 + delta) * sol.fixed_point;
    const SymMatrix lhs = inflated - mare::phi(p, table, *sol.gain, inflated);

    // the stage-cost offset W + sum_I w_I K N_I U N_I Kᵀ is phi at X = 0
    const SymMatrix rhs =
        delta * mare::phi(p, table, *sol.gain, SymMatrix(p.state_dim()));
    CHECK(mare::frobenius_norm(lhs - rhs) <=
          1e-10 * std::max(1.0, mare::frobenius_norm(sol.fixed_point)));
  }
  CHECK(tested >= 4);
}

TEST_CASE("certificates from converged solves") {
  // reliable channels, classical regime
  testgen::Rng rng(149);
  PlantModel p = testgen::plant(rng, 2, 2);
  for (auto& nu : p.channels.nu_bar) nu = 1.0;
  const SubsetTable table = mare::eta_squared(p.channels);
  const mare::MareSolution sol = mare::solve_mare(p, {});
  REQUIRE(sol.verdict == mare::SolveVerdict::Converged);
  const mare::LmiCertificate cert =
      mare::certificate_from_solution(p, table, sol, 1e-6);
  CHECK(cert.feasible);
  CHECK(cert.min_pivot > 0.0);

  // lossy scalar case
  const PlantModel sc = testgen::scalar_plant(2.0, 1.0, 1.0, 1.0, 0.8);
  const SubsetTable sct = mare::eta_squared(sc.channels);
  const mare::MareSolution scs = mare::solve_mare(sc, {});
  REQUIRE(scs.verdict == mare::SolveVerdict::Converged);
  CHECK(mare::certificate_from_solution(sc, sct, scs, 1e-6).feasible);

  // delta = 0 leaves no strictness margin: the check fails at tolerance
  CHECK_FALSE(mare::certificate_from_solution(sc, sct, scs, 0.0).feasible);

  // a divergent solve yields no certificate
  const PlantModel bad = testgen::scalar_plant(2.0, 1.0, 1.0, 1.0, 0.5);
  const mare::MareSolution bads = mare::solve_mare(bad, {});
  REQUIRE(bads.verdict == mare::SolveVerdict::Diverged);
  CHECK_THROWS_AS(
      mare::certificate_from_solution(bad, mare::eta_squared(bad.channels), bads),
      mare::Error);
}

TEST_CASE("an indefinite Y is infeasible") {
  const PlantModel p = testgen::scalar_plant(0.5, 1.0, 1.0, 1.0, 0.5);
  const SubsetTable table = mare::eta_squared(p.channels);
  const auto verdict =
      mare::check_lmi(p, table, SymMatrix(Matrix{{-1.0}}), Matrix(1, 1));
  CHECK_FALSE(verdict.feasible);
}

TEST_CASE("singular W needs regularization") {
  PlantModel p;
  p.A = Matrix{{0.9, 0.2}, {0.0, 0.7}};
  p.B = Matrix{{1.0}, {0.5}};
  p.U = SymMatrix::identity(1);
  p.W = SymMatrix::diagonal({1.0, 0.0});
  p.channels = mare::ChannelSpec{1, {0.9}};
  const SubsetTable table = mare::eta_squared(p.channels);

  CHECK_THROWS_WITH(
      mare::assemble_lmi(p, table, SymMatrix::identity(2), Matrix(2, 1)),
      Catch::Matchers::ContainsSubstring("regularize"));

  const mare::RegularizedPlant reg = mare::regularize_state_weight(p);
  CHECK(reg.epsilon > 0.0);
  CHECK(mare::cholesky(reg.plant.W).ok);
  const mare::MareSolution sol = mare::solve_mare(reg.plant, {});
  REQUIRE(sol.verdict == mare::SolveVerdict::Converged);
  CHECK(mare::certificate_from_solution(reg.plant, table, sol, 1e-6).feasible);
}
