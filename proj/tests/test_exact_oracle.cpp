#include <gtest/gtest.h>

#include <random>

#include "pairtherm/exact_oracle.hpp"
#include "test_support.hpp"

using namespace pairtherm;

TEST(Fock, ProjectorCountsStates) {
  for (int omega = 1; omega <= 4; ++omega) {
    const FockSpace fs(omega);
    for (int n = 0; n <= 2 * omega; ++n) EXPECT_DOUBLE_EQ(fs.projector(n).trace(), binomial(2 * omega, n));
  }
  EXPECT_THROW(FockSpace(5), OracleSizeError);
}

TEST(Fock, HamiltonianConservesNumber) {
  const auto levels = build_uniform_levels(3, 1.0);
  const FockSpace fs(3);
  const auto H = fs.hamiltonian(levels, ModelParams{0.7, 0.2, 2});
  const auto P = fs.projector(2);
  EXPECT_LT((P * H - H * P).norm(), 1e-14);
}

TEST(Fock, QuadratureProjectorMatchesSubspace) {
  std::mt19937_64 rng(11);
  const auto levels = build_uniform_levels(3, 1.0);
  const ModelParams model{0.5, 0.0, 2};
  const auto s = pairtherm::testing::random_state(rng, 3, 0.5);
  const auto a = fock_trace_small(levels, model, s, 0);
  const auto b = fock_trace_small(levels, model, s, 16);
  EXPECT_NEAR(a.z_phi, b.z_phi, 1e-12);
  EXPECT_NEAR(a.energy, b.energy, 1e-12);
  EXPECT_NEAR(a.entropy, b.entropy, 1e-12);
}

TEST(Canonical, SectorBookkeeping) {
  for (int omega : {2, 5, 8}) {
    const auto levels = build_uniform_levels(omega, 3.0);
    for (int n = 2; n <= 2 * omega; n += 2) {
      const auto sp = canonical_spectrum(levels, ModelParams{0.4, 0.0, n});
      EXPECT_DOUBLE_EQ(sp.state_count, binomial(2 * omega, n));
    }
  }
}

TEST(Canonical, SinglePair) {
  const auto levels = explicit_levels({0.7});
  const ModelParams model{0.3, 0.0, 2};
  for (double T : {0.1, 1.0, 5.0}) {
    const auto p = exact_canonical(levels, model, T);
    EXPECT_NEAR(p.E, 2 * 0.7 - 0.3, 1e-14);
    EXPECT_NEAR(p.C, 0.0, 1e-12);
    EXPECT_NEAR(p.F, 2 * 0.7 - 0.3, 1e-12);
  }
}

TEST(Canonical, FreeFermionLimit) {
  const auto levels = build_uniform_levels(8, 4.0);
  for (int n : {2, 8, 12}) {
    for (double T : {0.1, 0.5, 2.0}) {
      const auto a = exact_canonical(levels, ModelParams{0.0, 0.1, n}, T);
      const auto b = free_fermion_canonical(levels, 0.1, n, T);
      EXPECT_NEAR(a.F, b.F, 1e-10);
      EXPECT_NEAR(a.E, b.E, 1e-10);
      EXPECT_NEAR(a.S, b.S, 1e-10);
      EXPECT_NEAR(a.C, b.C, 1e-10);
    }
  }
}

TEST(Canonical, HellmannFeynmanAgreesWithMatrixElements) {
  const auto levels = build_uniform_levels(8, 3.0);
  const auto pts = exact_canonical(levels, ModelParams{0.6, 0.0, 8}, {0.1, 0.5, 1.5});
  for (const auto& p : pts) EXPECT_NEAR(p.bb, p.bb_hf, 1e-9);
}

TEST(Canonical, MatchesDenseFockDiagonalisation) {
  const auto levels = explicit_levels({-0.9, 0.1, 0.6});
  const ModelParams model{0.8, 0.05, 2};
  const FockSpace fs(3);
  const Eigen::MatrixXd H = fs.hamiltonian(levels, model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::MatrixXd B = fs.pair_annihilator();
  const Eigen::MatrixXd BB = B.transpose() * B;
  const Eigen::MatrixXd N = fs.number();
  for (double T : {0.2, 1.0}) {
    double z = 0.0, e = 0.0, bb = 0.0;
    for (int i = 0; i < fs.dim(); ++i) {
      const auto& x = es.eigenvectors().col(i);
      if (std::abs(x.dot(N * x) - 2.0) > 1e-9) continue;
      const double w = std::exp(-es.eigenvalues()[i] / T);
      z += w;
      e += w * es.eigenvalues()[i];
      bb += w * x.dot(BB * x);
    }
    const auto p = exact_canonical(levels, model, T);
    EXPECT_NEAR(p.F, -T * std::log(z), 1e-12);
    EXPECT_NEAR(p.E, e / z, 1e-12);
    EXPECT_NEAR(p.bb, bb / z, 1e-12);
  }
}

TEST(Canonical, EntropyNonNegativeAndGroundDegeneracy) {
  const auto levels = build_uniform_levels(4, 2.0);
  const ModelParams model{0.5, 0.0, 4};
  const auto pts = exact_canonical(levels, model, {0.01, 0.2, 1.0, 3.0});
  for (const auto& p : pts) EXPECT_GE(p.S, -1e-12);
  EXPECT_NEAR(pts.front().S, 0.0, 1e-6);  // non-degenerate paired ground state
}

TEST(Canonical, OccupationsSumToN) {
  const auto levels = build_uniform_levels(6, 2.0);
  const auto p = exact_canonical(levels, ModelParams{0.5, 0.0, 6}, 0.4);
  double s = 0.0;
  for (double o : p.occupation) s += 2.0 * o;
  EXPECT_NEAR(s, 6.0, 1e-12);
}

TEST(Canonical, RejectsOversizedSystems) {
  EXPECT_THROW(canonical_spectrum(build_uniform_levels(20, 1.0), ModelParams{0.1, 0.0, 20}), OracleSizeError);
}
