#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "pairtherm/exact_oracle.hpp"
#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/projected_functional.hpp"
#include "test_support.hpp"

using namespace pairtherm;
using pairtherm::testing::random_state;

namespace {
constexpr double kPi = std::numbers::pi;

void expect_close(cplx a, cplx b, double tol) { EXPECT_LT(std::abs(a - b), tol) << a << " vs " << b; }
}  // namespace

TEST(PairKernel, IdentityAtZeroAngle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_state(rng, 1, 0.5);
    const auto K = pair_kernel(s, 0, 0.0);
    const double f = s.f(0), v2 = s.v[0] * s.v[0];
    expect_close(K.zeta, 1.0, 1e-15);
    expect_close(K.xi, 1.0, 1e-15);
    expect_close(K.rho, v2 * (1.0 - 2.0 * f) + f, 1e-14);
    expect_close(K.kappa, s.u(0) * s.v[0] * (1.0 - 2.0 * f), 1e-14);
    expect_close(K.dlnzeta_df, 0.0, 1e-15);
  }
}

TEST(PairKernel, EmptyLevelIsPurePhase) {
  for (double phi : {0.3, 1.0, 2.5}) {
    const auto K = pair_kernel(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, phi);
    expect_close(K.xi, std::polar(1.0, phi), 1e-15);
    expect_close(K.zeta, std::polar(1.0, phi), 1e-15);
    expect_close(K.rho, 0.0, 1e-15);
    expect_close(K.kappa, 0.0, 1e-15);
  }
}

TEST(PairKernel, FullyPairedLevel) {
  for (double phi : {0.4, 2.0}) {
    const auto K = pair_kernel(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, phi);
    const auto P = pair_space_trace(0.0, 1.0, 0.0, 0.0, phi);
    expect_close(K.zeta, std::polar(1.0, -phi), 1e-15);
    expect_close(K.zeta, P.norm, 1e-14);
    expect_close(K.rho, 1.0, 1e-14);
    expect_close(K.kappa, 0.0, 1e-15);
  }
}

TEST(PairKernel, ConjugationSymmetry) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(rng, 1, 0.7);
    const double phi = ang(rng);
    const auto a = pair_kernel(s, 0, phi);
    const auto b = pair_kernel(s, 0, -phi);
    expect_close(a.zeta, std::conj(b.zeta), 1e-14);
    expect_close(a.rho, std::conj(b.rho), 1e-14);
    expect_close(a.kappa, std::conj(b.kappa), 1e-14);
    expect_close(a.kappa_bar, std::conj(b.kappa_bar), 1e-14);
    EXPECT_LE(std::abs(a.xi), 1.0 + 1e-15);
  }
}

TEST(PairKernel, SpecificPointMatchesTrace) {
  const double v = std::sqrt(0.3), u = std::sqrt(0.7);
  const auto K = pair_kernel(u, v, 0.1, 0.1, 0.9, 0.9, 1.0);
  for (auto basis : {PairBasis::particle, PairBasis::quasiparticle}) {
    const auto P = pair_space_trace(u, v, 0.1, 0.1, 1.0, basis);
    expect_close(K.zeta, P.norm, 1e-12);
    expect_close(K.rho, P.rho, 1e-12);
    expect_close(K.rho_bar, P.rho_bar, 1e-12);
    expect_close(K.kappa, P.kappa, 1e-12);
    expect_close(K.kappa_bar, P.kappa_bar, 1e-12);
  }
}

TEST(PairKernel, RandomisedAgainstBothTraceBases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = unit(rng), u = std::sqrt(1.0 - v * v);
    const double f = unit(rng), fb = unit(rng), phi = ang(rng);
    const auto K = pair_kernel(u, v, f, fb, 1.0 - f, 1.0 - fb, phi);
    const auto A = pair_space_trace(u, v, f, fb, phi, PairBasis::particle);
    const auto B = pair_space_trace(u, v, f, fb, phi, PairBasis::quasiparticle);
    if (std::abs(K.zeta) < 1e-3) continue;  // ratios lose digits near a zero of zeta
    auto err = [](cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
    for (const auto& P : {A, B}) {
      worst = std::max({worst, err(K.zeta, P.norm), err(K.rho, P.rho), err(K.rho_bar, P.rho_bar),
                        err(K.kappa, P.kappa), err(K.kappa_bar, P.kappa_bar)});
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(PairKernel, LeftRotationSwapsAnomalousPhases) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int i = 0; i < 50; ++i) {
    const double v = unit(rng), u = std::sqrt(1.0 - v * v), f = unit(rng), phi = 2.0 * unit(rng);
    const auto K = pair_kernel(u, v, f, f, 1.0 - f, 1.0 - f, phi);
    const auto P = pair_space_trace(u, v, f, f, phi, PairBasis::particle, GaugeOrder::left);
    expect_close(K.zeta, P.norm, 1e-12);
    expect_close(K.rho, P.rho, 1e-12);
    expect_close(K.kappa, P.kappa_bar, 1e-12);
    expect_close(K.kappa_bar, P.kappa, 1e-12);
  }
}

// zeta is affine in f_k and in v^2, so these difference quotients are exact.
TEST(PairKernel, DerivativesAgainstExactDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  for (int i = 0; i < 500; ++i) {
    const double v = unit(rng), u = std::sqrt(1.0 - v * v);
    const double f = unit(rng), fb = unit(rng), phi = ang(rng);
    const auto K = pair_kernel(u, v, f, fb, 1.0 - f, 1.0 - fb, phi);
    if (std::abs(K.zeta) < 1e-2) continue;
    const cplx z1 = pair_kernel(u, v, 1.0, fb, 0.0, 1.0 - fb, phi).zeta;
    const cplx z0 = pair_kernel(u, v, 0.0, fb, 1.0, 1.0 - fb, phi).zeta;
    expect_close(K.dlnzeta_df, (z1 - z0) / K.zeta, 1e-12);
    const cplx zv1 = pair_kernel(0.0, 1.0, f, fb, 1.0 - f, 1.0 - fb, phi).zeta;
    const cplx zv0 = pair_kernel(1.0, 0.0, f, fb, 1.0 - f, 1.0 - fb, phi).zeta;
    expect_close(K.dlnzeta_dv, 2.0 * v * (zv1 - zv0) / K.zeta, 1e-12);
  }
}

TEST(PairKernel, DerivativesAgainstCentralDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  const double h = 1e-5;
  for (int i = 0; i < 200; ++i) {
    const double v = unit(rng), f = unit(rng), fb = unit(rng), phi = ang(rng);
    auto lz = [&](double vv, double ff) {
      return std::log(pair_kernel(std::sqrt(1 - vv * vv), vv, ff, fb, 1 - ff, 1 - fb, phi).zeta);
    };
    const auto K = pair_kernel(std::sqrt(1 - v * v), v, f, fb, 1 - f, 1 - fb, phi);
    if (std::abs(K.zeta) < 0.05) continue;
    const cplx df = (lz(v, f + h) - lz(v, f - h)) / (2 * h);
    const cplx dv = (lz(v + h, f) - lz(v - h, f)) / (2 * h);
    expect_close(K.dlnzeta_df, df, 1e-7);
    expect_close(K.dlnzeta_dv, dv, 1e-7);
  }
}

TEST(Measure, NoneGridIsUnit) {
  std::mt19937_64 rng(6);
  const auto s = random_state(rng, 5, 0.4);
  const auto m = measure(s, GaugeGrid::none(4, 5));
  EXPECT_EQ(m.size(), 1);
  EXPECT_NEAR(m.z(), 1.0, 1e-15);
  const std::vector<cplx> ones(1, 1.0);
  EXPECT_DOUBLE_EQ(gauge_average(ones, m), 1.0);
}

TEST(Measure, OnePairCertainty) {
  VariationalState s;
  s.T = 0.1;
  s.v = {1.0};
  s.eps = {5.0};  // f ~ 2e-22
  const auto grid = GaugeGrid::full(2, 1);
  const auto m = measure(s, grid);
  EXPECT_GT(m.z(), 0.0);
  const KernelTable tab(s, grid);
  std::vector<cplx> N(grid.size());
  for (int j = 0; j < grid.size(); ++j) N[j] = tab.at(j, 0).rho + tab.at(j, 0).rho_bar;
  EXPECT_NEAR(gauge_average(N, m), 2.0, 1e-12);
}

TEST(Measure, ProjectedNormMatchesFockTrace) {
  std::mt19937_64 rng(7);
  const auto levels = pairtherm::testing::random_levels(rng, 3);
  const ModelParams model{0.4, 0.0, 2};
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = random_state(rng, 3, 0.6);
    const auto m = measure(s, GaugeGrid::full(2, 3, 16));
    const auto tr = fock_trace_small(levels, model, s);
    EXPECT_NEAR(m.z(), tr.z_phi, 1e-10);
  }
}

TEST(Measure, ProjectionFixesParticleNumber) {
  std::mt19937_64 rng(8);
  for (int omega : {3, 6, 12}) {
    const auto s = random_state(rng, omega, 0.5);
    for (int n = 2; n < 2 * omega; n += 2) {
      const auto grid = GaugeGrid::full(n, omega);
      const KernelTable tab(s, grid);
      const auto m = measure(tab, grid);
      std::vector<cplx> N(grid.size());
      for (int j = 0; j < grid.size(); ++j) {
        cplx sum = 0.0;
        for (int k = 0; k < omega; ++k) sum += tab.at(j, k).rho + tab.at(j, k).rho_bar;
        N[j] = sum;
      }
      EXPECT_NEAR(gauge_average(N, m), n, 1e-9 * std::max(1.0, m.cancellation)) << omega << " " << n;
    }
  }
}

// <B>_C = Tr(P W P B) / Tr(W P) vanishes; the single-angle bracket of
// sum_k kappa_k is Tr(W P B) / Tr(W P), which does not.
TEST(Measure, PairTransferBracket) {
  std::mt19937_64 rng(10);
  const auto levels = pairtherm::testing::random_levels(rng, 3);
  const ModelParams model{0.4, 0.0, 2};
  const auto s = random_state(rng, 3, 0.6);
  const auto grid = GaugeGrid::full(2, 3, 16);
  const KernelTable tab(s, grid);
  const auto m = measure(tab, grid);
  std::vector<cplx> pair(grid.size());
  for (int j = 0; j < grid.size(); ++j)
    for (int k = 0; k < 3; ++k) pair[j] += tab.at(j, k).kappa;
  const auto tr = fock_trace_small(levels, model, s);
  EXPECT_LT(std::abs(tr.pair_transfer_sandwich), 1e-14);
  EXPECT_NEAR(gauge_average(pair, m), tr.pair_transfer, 1e-12);
}

// Physical brackets, the rhs of the quasiparticle-energy equation and the
// full gradient have trigonometric-polynomial integrands. The split into
// D~_k and h~_k does not (each carries 1/zeta_k^2), so those two converge
// with L rather than being exact.
TEST(Measure, GridDoublingInvariance) {
  std::mt19937_64 rng(9);
  const auto levels = pairtherm::testing::random_levels(rng, 8);
  const ModelParams model{0.5, 0.1, 8};
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = random_state(rng, 8, 0.5);
    const auto a = evaluate(s, GaugeGrid::full(8, 8), levels, model);
    const auto b = evaluate(s, GaugeGrid::full(8, 8, 2 * GaugeGrid::default_nodes(8)), levels, model);
    EXPECT_NEAR(a.E, b.E, 1e-12);
    EXPECT_NEAR(a.S, b.S, 1e-12);
    EXPECT_NEAR(a.bb, b.bb, 1e-12);
    EXPECT_NEAR(a.n_mean, b.n_mean, 1e-12);
    EXPECT_NEAR(a.n_var, b.n_var, 1e-11);
    for (int k = 0; k < 8; ++k) {
      EXPECT_NEAR(a.fc[k], b.fc[k], 1e-12);
      EXPECT_NEAR(a.occupation[k], b.occupation[k], 1e-12);
      EXPECT_NEAR(a.residual_f[k], b.residual_f[k], 1e-12);
      EXPECT_NEAR(a.grad_theta[k], b.grad_theta[k], 1e-12);
      EXPECT_NEAR(a.rhs[k], b.rhs[k], 1e-11);
    }
  }
}

TEST(Measure, DefaultNodeCount) {
  EXPECT_EQ(GaugeGrid::default_nodes(4), 32);
  EXPECT_EQ(GaugeGrid::default_nodes(26), 60);
  EXPECT_EQ(GaugeGrid::default_nodes(27), 64);
  EXPECT_EQ(GaugeGrid::default_nodes(12), 32);
  EXPECT_THROW(GaugeGrid::full(4, 4, 12), InvalidArgument);
}

TEST(Measure, ParityGridHasTwoNodes) {
  const auto g = GaugeGrid::parity(4, 4);
  ASSERT_EQ(g.size(), 2);
  EXPECT_DOUBLE_EQ(g.nodes[1], kPi);
}
