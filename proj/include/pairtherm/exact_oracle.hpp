#pragma once

// Ground truth for small systems:
//  * one (k, kbar) pair as explicit 4x4 matrices, built in two bases;
//  * dense Fock space for omega <= 4 (dimension 4^omega);
//  * exact canonical thermodynamics of the constant-pairing Hamiltonian by
//    blocked-level (seniority) decomposition;
//  * canonical free fermions by an elementary-symmetric-polynomial recursion.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pairtherm/error.hpp"
#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/numerics.hpp"
#include "pairtherm/pairing_model.hpp"

namespace pairtherm {

namespace detail {

/// Jordan-Wigner annihilation operator for `mode` among `modes` fermion
/// modes; basis index bit j is the occupation of mode j.
inline Eigen::MatrixXd jw_annihilator(int modes, int mode) {
  const int dim = 1 << modes;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    if (!(s & (1 << mode))) continue;
    const int below = std::popcount(static_cast<unsigned>(s & ((1 << mode) - 1)));
    c(s ^ (1 << mode), s) = (below % 2) ? -1.0 : 1.0;
  }
  return c;
}

}  // namespace detail

// ---- one pair ---------------------------------------------------------------

enum class PairBasis { particle, quasiparticle };

/// Placement of e^{-i phi N} relative to the thermal weight W. Densities that
/// commute with N do not care; the anomalous ones pick up opposite phases.
/// `right` (Tr(W e^{-i phi N} O)) is the convention under which the
/// stationarity equations are exact gradients of F~.
enum class GaugeOrder { right, left };

struct PairTrace {
  cplx norm;  // e^{i phi} Tr(e^{-i phi N} W) / Tr(W); equals zeta
  cplx rho;
  cplx rho_bar;
  cplx kappa;      // <c_kbar c_k>
  cplx kappa_bar;  // <c_k^dag c_kbar^dag>
};

/// Normalised traces of w^phi restricted to one pair, with
/// W = e^{-H0/T} / Tr e^{-H0/T} = prod_q [(1 - f_q)(1 - n_q) + f_q n_q].
/// Quasiparticles: alpha_k = u c_k - v c_kbar^dag, alpha_kbar = u c_kbar + v c_k^dag.
inline PairTrace pair_space_trace(double u, double v, double f, double fbar, double phi,
                                  PairBasis basis = PairBasis::particle, GaugeOrder order = GaugeOrder::right) {
  using Eigen::MatrixXcd;
  using Eigen::MatrixXd;
  const MatrixXd a0 = detail::jw_annihilator(2, 0);
  const MatrixXd a1 = detail::jw_annihilator(2, 1);
  const MatrixXd id = MatrixXd::Identity(4, 4);

  MatrixXd ck, ckb, W;
  MatrixXcd rot;
  if (basis == PairBasis::particle) {
    ck = a0;
    ckb = a1;
    const MatrixXd qk = u * ck - v * ckb.transpose();
    const MatrixXd qkb = u * ckb + v * ck.transpose();
    const MatrixXd nk = qk.transpose() * qk;
    const MatrixXd nkb = qkb.transpose() * qkb;
    W = ((1.0 - f) * (id - nk) + f * nk) * ((1.0 - fbar) * (id - nkb) + fbar * nkb);
    rot = MatrixXcd::Zero(4, 4);
    for (int s = 0; s < 4; ++s) rot(s, s) = std::exp(cplx(0.0, -phi * std::popcount(static_cast<unsigned>(s))));
  } else {
    // Basis of quasiparticle occupations; particles from the inverse transform.
    const MatrixXd& qk = a0;
    const MatrixXd& qkb = a1;
    ck = u * qk + v * qkb.transpose();
    ckb = u * qkb - v * qk.transpose();
    W = MatrixXd::Zero(4, 4);
    for (int s = 0; s < 4; ++s) W(s, s) = ((s & 1) ? f : 1.0 - f) * ((s & 2) ? fbar : 1.0 - fbar);
    const MatrixXd N = ck.transpose() * ck + ckb.transpose() * ckb;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(N);
    const Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx(0.0, -phi)).array().exp();
    rot = es.eigenvectors().cast<cplx>() * ph.asDiagonal() * es.eigenvectors().transpose().cast<cplx>();
  }
  const MatrixXcd RW = order == GaugeOrder::left ? MatrixXcd(rot * W.cast<cplx>()) : MatrixXcd(W.cast<cplx>() * rot);
  const cplx z = RW.trace();
  auto ex = [&](const MatrixXd& O) { return (RW * O.cast<cplx>()).trace() / z; };
  PairTrace out;
  out.norm = std::exp(cplx(0.0, phi)) * z / W.trace();
  out.rho = ex(ck.transpose() * ck);
  out.rho_bar = ex(ckb.transpose() * ckb);
  out.kappa = ex(ckb * ck);
  out.kappa_bar = ex(ck.transpose() * ckb.transpose());
  return out;
}

// ---- dense Fock space -------------------------------------------------------

inline constexpr int kFockMaxOmega = 4;

/// Modes are ordered (k, kbar) pair by pair: mode 2k is k, mode 2k+1 is kbar.
class FockSpace {
 public:
  explicit FockSpace(int omega) : omega_(omega) {
    if (omega < 1 || omega > kFockMaxOmega) {
      throw OracleSizeError("fock space supports 1 <= omega <= " + std::to_string(kFockMaxOmega) + ", got " +
                            std::to_string(omega));
    }
    for (int m = 0; m < modes(); ++m) c_.push_back(detail::jw_annihilator(modes(), m));
  }

  int omega() const { return omega_; }
  int modes() const { return 2 * omega_; }
  int dim() const { return 1 << modes(); }
  const Eigen::MatrixXd& c(int mode) const { return c_[mode]; }
  Eigen::MatrixXd cdag(int mode) const { return c_[mode].transpose(); }
  Eigen::MatrixXd number(int mode) const { return cdag(mode) * c_[mode]; }

  Eigen::MatrixXd number() const {
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(dim(), dim());
    for (int s = 0; s < dim(); ++s) N(s, s) = std::popcount(static_cast<unsigned>(s));
    return N;
  }

  /// B = sum_k c_kbar c_k.
  Eigen::MatrixXd pair_annihilator() const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim(), dim());
    for (int k = 0; k < omega_; ++k) B += c_[2 * k + 1] * c_[2 * k];
    return B;
  }

  Eigen::MatrixXd hamiltonian(const LevelScheme& levels, const ModelParams& model) const {
    if (levels.omega != omega_) throw InvalidArgument("fock hamiltonian: omega mismatch");
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim(), dim());
    for (int k = 0; k < omega_; ++k) H += (levels.t[k] - model.mu) * (number(2 * k) + number(2 * k + 1));
    const Eigen::MatrixXd B = pair_annihilator();
    H -= model.g * B.transpose() * B;
    return H;
  }

  /// Quasiparticle annihilators for the state's Bogolyubov amplitudes.
  Eigen::MatrixXd qp_annihilator(const VariationalState& s, int mode) const {
    const int k = mode / 2;
    const double u = s.u(k), v = s.v[k];
    if (mode % 2 == 0) return u * c_[2 * k] - v * cdag(2 * k + 1);
    return u * c_[2 * k + 1] + v * cdag(2 * k);
  }

  /// e^{-H0/T} / Tr e^{-H0/T}.
  Eigen::MatrixXd thermal_weight(const VariationalState& s) const {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim(), dim());
    Eigen::MatrixXd W = id;
    for (int m = 0; m < modes(); ++m) {
      const Eigen::MatrixXd a = qp_annihilator(s, m);
      const Eigen::MatrixXd n = a.transpose() * a;
      const double f = s.f(m / 2);
      W = W * ((1.0 - f) * (id - n) + f * n);
    }
    return W;
  }

  /// H0 = sum over all 2 omega quasiparticles of eps alpha^dag alpha.
  Eigen::MatrixXd h0(const VariationalState& s) const {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim(), dim());
    for (int m = 0; m < modes(); ++m) {
      const Eigen::MatrixXd a = qp_annihilator(s, m);
      H += s.eps[m / 2] * a.transpose() * a;
    }
    return H;
  }

  /// Exact projector onto the n-particle subspace.
  Eigen::MatrixXd projector(int n) const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim(), dim());
    for (int s = 0; s < dim(); ++s)
      if (std::popcount(static_cast<unsigned>(s)) == n) P(s, s) = 1.0;
    return P;
  }

  /// (1/L) sum_j e^{-i phi_j (N - n)} on the offset grid.
  Eigen::MatrixXcd projector_quadrature(int n, int L) const {
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int j = 0; j < L; ++j) {
      const double phi = (j + 0.5) * 2.0 * std::numbers::pi / L;
      for (int s = 0; s < dim(); ++s)
        P(s, s) += std::exp(cplx(0.0, -phi * (std::popcount(static_cast<unsigned>(s)) - n))) / double(L);
    }
    return P;
  }

  /// e^{-i phi N} (diagonal in the particle basis).
  Eigen::MatrixXcd gauge_rotation(double phi) const {
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int s = 0; s < dim(); ++s) R(s, s) = std::exp(cplx(0.0, -phi * std::popcount(static_cast<unsigned>(s))));
    return R;
  }

 private:
  int omega_;
  std::vector<Eigen::MatrixXd> c_;
};

/// Traces the projected functional is built from, evaluated densely.
struct FockTraces {
  double z_phi = 0.0;  // Tr(W P)
  double energy = 0.0;  // Tr(W H P) / Tr(W P)
  double entropy = 0.0;  // S~ = (1/T) Tr(W H0 P)/Tr(W P) + ln Z0 + ln Tr(W P)
  double free_energy = 0.0;
  double bb = 0.0;
  double n_mean = 0.0;
  double n_var = 0.0;
  std::vector<double> fc;           // Tr(W alpha^dag alpha P) / Tr(W P), per level
  std::vector<double> fc_sandwich;  // Tr(P W P alpha^dag alpha) / Tr(W P), per level
  std::vector<double> occupation;   // <N_k>
  double pair_transfer = 0.0;           // Tr(W P B) / Tr(W P)
  double pair_transfer_sandwich = 0.0;  // Tr(P W P B) / Tr(W P), i.e. <B>_C
};

/// Projected traces for a state. `L` = 0 uses the exact subspace projector,
/// L > 0 the angle quadrature with L nodes.
inline FockTraces fock_trace_small(const LevelScheme& levels, const ModelParams& model, const VariationalState& s,
                                   int L = 0) {
  const FockSpace fs(levels.omega);
  if (s.size() != levels.omega) throw InvalidArgument("fock_trace_small: state size mismatch");
  const Eigen::MatrixXcd W = fs.thermal_weight(s).cast<cplx>();
  const Eigen::MatrixXcd P = L > 0 ? fs.projector_quadrature(model.n, L) : fs.projector(model.n).cast<cplx>();
  const Eigen::MatrixXcd WP = W * P;
  const cplx z = WP.trace();
  auto ex = [&](const Eigen::MatrixXd& O) { return ((WP * O.cast<cplx>()).trace() / z).real(); };

  FockTraces out;
  out.z_phi = z.real();
  out.energy = ex(fs.hamiltonian(levels, model));
  const Eigen::MatrixXd B = fs.pair_annihilator();
  out.bb = ex(B.transpose() * B);
  const Eigen::MatrixXd N = fs.number();
  out.n_mean = ex(N);
  out.n_var = ex(N * N) - out.n_mean * out.n_mean;
  double log_z0 = 0.0;
  for (int k = 0; k < levels.omega; ++k) log_z0 += 2.0 * log1p_exp_neg(s.eps[k] / s.T);
  out.entropy = ex(fs.h0(s)) / s.T + log_z0 + std::log(out.z_phi);
  out.free_energy = out.energy - s.T * out.entropy;
  const Eigen::MatrixXcd PWP = P * W * P;
  out.pair_transfer = ex(B);
  out.pair_transfer_sandwich = ((PWP * B.cast<cplx>()).trace() / z).real();
  for (int k = 0; k < levels.omega; ++k) {
    const Eigen::MatrixXd a = fs.qp_annihilator(s, 2 * k);
    const Eigen::MatrixXd na = a.transpose() * a;
    out.fc.push_back(ex(na));
    out.fc_sandwich.push_back(((PWP * na.cast<cplx>()).trace() / z).real());
    out.occupation.push_back(ex(fs.number(2 * k)));
  }
  return out;
}

/// Tr(W e^{-i phi N} O) / Tr(W e^{-i phi N}), or with the rotation on the left.
inline cplx fock_rotated_expectation(const FockSpace& fs, const Eigen::MatrixXd& W, const Eigen::MatrixXd& O,
                                     double phi, GaugeOrder order = GaugeOrder::right) {
  const Eigen::MatrixXcd R = fs.gauge_rotation(phi);
  const Eigen::MatrixXcd RW = order == GaugeOrder::left ? Eigen::MatrixXcd(R * W.cast<cplx>())
                                                         : Eigen::MatrixXcd(W.cast<cplx>() * R);
  return (RW * O.cast<cplx>()).trace() / RW.trace();
}

// ---- exact canonical ensemble ----------------------------------------------

/// One eigenstate of the canonical pairing Hamiltonian.
struct CanonicalLevel {
  double energy;
  double degeneracy;  // 2^b for b blocked levels
  double bb;          // <B^dag B>
};

struct CanonicalSpectrum {
  int omega = 0;
  int n = 0;
  std::vector<CanonicalLevel> states;
  std::vector<double> occupation;  // per state, omega entries of <N_k> (row-major)
  double state_count = 0.0;        // sum of degeneracies; equals C(2 omega, n)
  double ground_energy = std::numeric_limits<double>::infinity();
};

struct CanonicalPoint {
  double T = 0.0;
  double F = 0.0;
  double E = 0.0;
  double S = 0.0;
  double C = 0.0;
  double bb = 0.0;     // spectral sum of explicit matrix elements
  double bb_hf = 0.0;  // -dF/dg (Hellmann-Feynman)
  std::vector<double> occupation;  // <N_k> (one member of the pair)
};

inline constexpr int kCanonicalMaxOmega = 16;
inline constexpr double kCanonicalMaxSectorDim = 15000.0;

inline double binomial(int a, int b) {
  if (b < 0 || b > a) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return std::round(r);
}

/// Full spectrum by blocked-level decomposition. Blocked (singly occupied)
/// levels are inert under B; the remaining levels carry p = (n - b)/2 pairs.
inline CanonicalSpectrum canonical_spectrum(const LevelScheme& levels, const ModelParams& model) {
  validate(levels, model);
  const int omega = levels.omega;
  const int n = model.n;
  if (omega > kCanonicalMaxOmega) {
    throw OracleSizeError("exact canonical: omega = " + std::to_string(omega) + " exceeds " +
                          std::to_string(kCanonicalMaxOmega));
  }
  const double largest = binomial(omega, std::min(n / 2, omega - n / 2));
  if (largest > kCanonicalMaxSectorDim) {
    throw OracleSizeError("exact canonical: largest sector dimension " + std::to_string(largest) + " too big");
  }
  CanonicalSpectrum sp;
  sp.omega = omega;
  sp.n = n;
  for (std::uint32_t S = 0; S < (1u << omega); ++S) {
    const int b = std::popcount(S);
    if (b > n || (n - b) % 2 != 0) continue;
    const int p = (n - b) / 2;
    std::vector<int> free;
    double blocked_energy = 0.0;
    for (int k = 0; k < omega; ++k) {
      if (S & (1u << k)) blocked_energy += levels.t[k] - model.mu;
      else free.push_back(k);
    }
    const int m = static_cast<int>(free.size());
    if (p > m) continue;
    // pair configurations: subsets of `free` with p members
    std::vector<std::uint32_t> basis;
    for (std::uint32_t c = 0; c < (1u << m); ++c)
      if (std::popcount(c) == p) basis.push_back(c);
    const int dim = static_cast<int>(basis.size());
    std::vector<int> index(1u << m, -1);
    for (int i = 0; i < dim; ++i) index[basis[i]] = i;

    Eigen::MatrixXd BB = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      const std::uint32_t c = basis[i];
      double one_body = blocked_energy;
      for (int a = 0; a < m; ++a)
        if (c & (1u << a)) one_body += 2.0 * (levels.t[free[a]] - model.mu);
      BB(i, i) = p;
      for (int a = 0; a < m; ++a) {
        if (!(c & (1u << a))) continue;
        for (int b2 = 0; b2 < m; ++b2) {
          if (c & (1u << b2)) continue;
          const std::uint32_t c2 = (c & ~(1u << a)) | (1u << b2);
          BB(index[c2], i) = 1.0;  // pair moves a -> b2; pair operators commute, no sign
        }
      }
      H(i, i) = one_body;
    }
    H -= model.g * BB;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::MatrixXd& V = es.eigenvectors();
    const Eigen::MatrixXd BV = BB * V;
    const double deg = std::ldexp(1.0, b);
    for (int i = 0; i < dim; ++i) {
      CanonicalLevel L;
      L.energy = es.eigenvalues()[i];
      L.degeneracy = deg;
      L.bb = V.col(i).dot(BV.col(i));
      sp.states.push_back(L);
      sp.ground_energy = std::min(sp.ground_energy, L.energy);
      std::vector<double> occ(omega, 0.0);
      for (int k = 0; k < omega; ++k)
        if (S & (1u << k)) occ[k] = 0.5;
      for (int r = 0; r < dim; ++r) {
        const double w = V(r, i) * V(r, i);
        for (int a = 0; a < m; ++a)
          if (basis[r] & (1u << a)) occ[free[a]] += w;
      }
      sp.occupation.insert(sp.occupation.end(), occ.begin(), occ.end());
      sp.state_count += deg;
    }
  }
  return sp;
}

namespace detail {

struct SpectralSums {
  double log_z, E, E2, bb;
  std::vector<double> occ;
};

inline SpectralSums spectral_sums(const CanonicalSpectrum& sp, double T) {
  if (!(T > 0.0)) throw InvalidArgument("exact canonical: T must be > 0");
  SpectralSums s{0.0, 0.0, 0.0, 0.0, std::vector<double>(sp.omega, 0.0)};
  double z = 0.0;
  for (std::size_t i = 0; i < sp.states.size(); ++i) {
    const auto& L = sp.states[i];
    const double w = L.degeneracy * std::exp(-(L.energy - sp.ground_energy) / T);
    z += w;
    s.E += w * L.energy;
    s.E2 += w * L.energy * L.energy;
    s.bb += w * L.bb;
    for (int k = 0; k < sp.omega; ++k) s.occ[k] += w * sp.occupation[i * sp.omega + k];
  }
  s.E /= z;
  s.E2 /= z;
  s.bb /= z;
  for (auto& o : s.occ) o /= z;
  s.log_z = std::log(z) - sp.ground_energy / T;
  return s;
}

inline double canonical_free_energy(const LevelScheme& levels, ModelParams model, double T) {
  const auto sp = canonical_spectrum(levels, model);
  return -T * spectral_sums(sp, T).log_z;
}

}  // namespace detail

/// Exact canonical thermodynamics on a temperature grid.
inline std::vector<CanonicalPoint> exact_canonical(const LevelScheme& levels, const ModelParams& model,
                                                   const std::vector<double>& T_grid, bool with_hellmann_feynman = true) {
  const auto sp = canonical_spectrum(levels, model);
  std::vector<CanonicalSpectrum> shifted;
  const double h = 1e-3 * std::max(model.g, 1e-2);
  if (with_hellmann_feynman) {
    for (double dg : {-2.0 * h, -h, h, 2.0 * h}) {
      ModelParams m = model;
      m.g += dg;
      if (m.g < 0.0) m.g = 0.0;
      shifted.push_back(canonical_spectrum(levels, m));
    }
  }
  std::vector<CanonicalPoint> out;
  for (double T : T_grid) {
    const auto s = detail::spectral_sums(sp, T);
    CanonicalPoint p;
    p.T = T;
    p.F = -T * s.log_z;
    p.E = s.E;
    p.S = (p.E - p.F) / T;
    p.C = std::max(0.0, s.E2 - s.E * s.E) / (T * T);
    p.bb = s.bb;
    p.occupation = s.occ;
    if (with_hellmann_feynman) {
      double F[4];
      for (int i = 0; i < 4; ++i) F[i] = -T * detail::spectral_sums(shifted[i], T).log_z;
      if (model.g >= 2.0 * h) {
        const double dFdg = (F[0] - 8.0 * F[1] + 8.0 * F[2] - F[3]) / (12.0 * h);
        p.bb_hf = -dFdg;
      } else {
        p.bb_hf = -(F[2] - p.F) / h;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline CanonicalPoint exact_canonical(const LevelScheme& levels, const ModelParams& model, double T) {
  return exact_canonical(levels, model, std::vector<double>{T}).front();
}

/// Canonical free fermions on the 2 omega states (each t_k twice), by the
/// elementary-symmetric-polynomial recursion with energy moments.
inline CanonicalPoint free_fermion_canonical(const LevelScheme& levels, double mu, int n, double T) {
  if (!(T > 0.0)) throw InvalidArgument("free_fermion_canonical: T must be > 0");
  std::vector<double> e;
  for (double t : levels.t) {
    e.push_back(t - mu);
    e.push_back(t - mu);
  }
  if (n < 0 || n > static_cast<int>(e.size())) throw InvalidArgument("free_fermion_canonical: bad n");
  const double emin = *std::min_element(e.begin(), e.end());
  std::vector<double> Z(n + 1, 0.0), W(n + 1, 0.0), Q(n + 1, 0.0);
  Z[0] = 1.0;
  for (double x : e) {
    const double w = std::exp(-(x - emin) / T);
    for (int j = n; j >= 1; --j) {
      Q[j] += w * (Q[j - 1] + 2.0 * x * W[j - 1] + x * x * Z[j - 1]);
      W[j] += w * (W[j - 1] + x * Z[j - 1]);
      Z[j] += w * Z[j - 1];
    }
  }
  CanonicalPoint p;
  p.T = T;
  const double logZ = std::log(Z[n]) - n * emin / T;
  p.F = -T * logZ;
  p.E = W[n] / Z[n];
  p.S = (p.E - p.F) / T;
  p.C = std::max(0.0, Q[n] / Z[n] - p.E * p.E) / (T * T);
  return p;
}

}  // namespace pairtherm
