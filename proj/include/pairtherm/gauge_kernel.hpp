#pragma once

// Per-pair gauge-rotated statistics of the quasiparticle trial operator and
// the gauge-angle quadrature that implements no, parity, or full
// particle-number projection.
//
// For one (k, kbar) pair with Bogolyubov amplitudes (u, v) and quasiparticle
// occupations (f, fbar) the rotated pair trace is
//   Tr_pair(e^{-i phi (N_pair - 1)} e^{-H0/T}) / Tr_pair(e^{-H0/T}) = zeta,
//   zeta = f(1-fbar) + (1-f) fbar + f fbar xi^* + (1-f)(1-fbar) xi,
//   xi   = u^2 e^{i phi} + v^2 e^{-i phi}.
// Densities of w^phi restricted to the pair, with A = v^2(1-f)(1-fbar) + u^2 f fbar
// and B = (1-f)(1-fbar) - f fbar:
//   rho_k      = [f(1-fbar) + e^{-i phi} A] / zeta
//   rho_kbar   = [(1-f) fbar + e^{-i phi} A] / zeta
//   kappa_k    = e^{+i phi} u v B / zeta        (<c_kbar c_k>)
//   kappabar_k = e^{-i phi} u v B / zeta        (<c_k^dag c_kbar^dag>)
// The anomalous densities are taken with the rotation to the right of the
// weight, Tr(e^{-H0/T} e^{-i phi N} O); with it on the left their phases swap.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "pairtherm/error.hpp"
#include "pairtherm/numerics.hpp"

namespace pairtherm {

using cplx = std::complex<double>;

/// Trial-operator parameters: one (v_k, eps_k) per doubly degenerate level
/// (time-reversal symmetric, f_k = f_kbar). Occupations are derived,
/// f_k = 1/(e^{eps_k/T} + 1), which keeps eps finite even when f underflows.
struct VariationalState {
  std::vector<double> v;
  std::vector<double> eps;
  double T = 0.0;

  int size() const { return static_cast<int>(v.size()); }
  double u(int k) const { return std::sqrt(std::max(0.0, 1.0 - v[k] * v[k])); }
  double f(int k) const { return occupation(eps[k], T); }
  double one_minus_f(int k) const { return occupation(-eps[k], T); }
  double f_variance(int k) const { return occupation_variance(eps[k], T); }

  /// Build from occupations; f must lie strictly inside (0, 1).
  static VariationalState from_occupations(std::vector<double> v, const std::vector<double>& f, double T) {
    if (v.size() != f.size()) throw InvalidArgument("from_occupations: size mismatch");
    if (!(T > 0.0)) throw InvalidArgument("from_occupations: T must be > 0");
    VariationalState s;
    s.T = T;
    s.v = std::move(v);
    s.eps.resize(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!(f[k] > 0.0 && f[k] < 1.0)) throw InvalidArgument("from_occupations: f must be in (0,1)");
      s.eps[k] = T * (std::log1p(-f[k]) - std::log(f[k]));
    }
    return s;
  }
};

inline void validate(const VariationalState& s) {
  if (s.v.size() != s.eps.size()) throw InvalidArgument("state: v and eps sizes differ");
  if (s.T < 0.0) throw InvalidArgument("state: negative temperature");
  for (std::size_t k = 0; k < s.v.size(); ++k) {
    if (!(s.v[k] >= 0.0 && s.v[k] <= 1.0)) throw InvalidArgument("state: v_k outside [0,1]");
    if (std::isnan(s.eps[k])) throw InvalidArgument("state: eps_k is NaN");
  }
}

enum class Projection { none, parity, full };

inline const char* to_string(Projection p) {
  switch (p) {
    case Projection::none: return "none";
    case Projection::parity: return "parity";
    case Projection::full: return "full";
  }
  return "?";
}

/// Gauge-angle quadrature. The projection phase is e^{i phi (n - omega)}.
struct GaugeGrid {
  Projection kind = Projection::none;
  std::vector<double> nodes;
  std::vector<double> base_weights;
  int n = 0;
  int omega = 0;

  int size() const { return static_cast<int>(nodes.size()); }

  /// max(2 omega + 8, 32) rounded up to a multiple of 4, which keeps
  /// phi = pi/2 (a zero of xi at u^2 = v^2) off the offset grid.
  static int default_nodes(int omega) {
    int L = std::max(2 * omega + 8, 32);
    return (L + 3) / 4 * 4;
  }

  static GaugeGrid none(int n, int omega) {
    return GaugeGrid{Projection::none, {0.0}, {1.0}, n, omega};
  }

  static GaugeGrid parity(int n, int omega) {
    return GaugeGrid{Projection::parity, {0.0, std::numbers::pi}, {0.5, 0.5}, n, omega};
  }

  /// Offset trapezoidal rule phi_j = (j + 1/2) 2 pi / L, exact for
  /// trigonometric polynomials of degree < L.
  static GaugeGrid full(int n, int omega, int L = 0) {
    if (L <= 0) L = default_nodes(omega);
    if (L < 2 * omega + 5) throw InvalidArgument("full grid: need L >= 2*omega + 5 for exactness");
    GaugeGrid g{Projection::full, {}, {}, n, omega};
    g.nodes.resize(L);
    g.base_weights.assign(L, 1.0 / L);
    for (int j = 0; j < L; ++j) g.nodes[j] = (j + 0.5) * 2.0 * std::numbers::pi / L;
    return g;
  }

  static GaugeGrid make(Projection kind, int n, int omega, int L = 0) {
    switch (kind) {
      case Projection::none: return none(n, omega);
      case Projection::parity: return parity(n, omega);
      case Projection::full: return full(n, omega, L);
    }
    throw InvalidArgument("unknown projection kind");
  }
};

struct PairKernel {
  cplx zeta;
  cplx xi;
  cplx rho;
  cplx rho_bar;
  cplx kappa;
  cplx kappa_bar;
  cplx dlnzeta_df;  // d ln zeta / d f_k at fixed f_kbar
  cplx dlnzeta_dv;
  bool floored = false;  // |zeta| was lifted to the floor
};

inline constexpr double kZetaFloor = 1e-14;

/// Closed-form pair kernel. `f`, `fbar` and their complements are passed
/// separately so that 1 - f stays accurate when f is close to one.
inline PairKernel pair_kernel(double u, double v, double f, double fbar, double g, double gbar, double phi) {
  const cplx ep(std::cos(phi), std::sin(phi));
  const cplx em = std::conj(ep);
  const double u2 = u * u;
  const double v2 = v * v;
  const double s = std::sin(phi);

  PairKernel K;
  K.xi = u2 * ep + v2 * em;
  K.zeta = f * gbar + g * fbar + f * fbar * std::conj(K.xi) + g * gbar * K.xi;
  if (std::abs(K.zeta) < kZetaFloor) {
    K.floored = true;
    K.zeta = (K.zeta == cplx(0.0)) ? cplx(kZetaFloor) : K.zeta * (kZetaFloor / std::abs(K.zeta));
  }
  const cplx inv = 1.0 / K.zeta;
  const double A = v2 * g * gbar + u2 * f * fbar;
  const double B = g * gbar - f * fbar;
  K.rho = (f * gbar + em * A) * inv;
  K.rho_bar = (g * fbar + em * A) * inv;
  K.kappa = ep * (u * v * B) * inv;
  K.kappa_bar = em * (u * v * B) * inv;
  K.dlnzeta_df = ((gbar - fbar) + fbar * std::conj(K.xi) - gbar * K.xi) * inv;
  K.dlnzeta_dv = cplx(0.0, -4.0 * v * s * B) * inv;
  return K;
}

inline PairKernel pair_kernel(const VariationalState& state, int k, double phi) {
  const double f = state.f(k);
  const double g = state.one_minus_f(k);
  return pair_kernel(state.u(k), state.v[k], f, f, g, g, phi);
}

/// Kernels for every (node, level), stored node-major: at(j, k).
class KernelTable {
 public:
  KernelTable(const VariationalState& state, const GaugeGrid& grid)
      : omega_(state.size()), nodes_(grid.size()), data_(static_cast<std::size_t>(omega_) * nodes_) {
    for (int k = 0; k < omega_; ++k) {
      const double f = state.f(k);
      const double g = state.one_minus_f(k);
      const double u = state.u(k);
      for (int j = 0; j < nodes_; ++j) {
        auto& K = data_[static_cast<std::size_t>(j) * omega_ + k];
        K = pair_kernel(u, state.v[k], f, f, g, g, grid.nodes[j]);
        if (K.floored) ++floored_;
      }
    }
  }

  const PairKernel& at(int j, int k) const { return data_[static_cast<std::size_t>(j) * omega_ + k]; }
  std::span<const PairKernel> node(int j) const {
    return {data_.data() + static_cast<std::size_t>(j) * omega_, static_cast<std::size_t>(omega_)};
  }
  int omega() const { return omega_; }
  int nodes() const { return nodes_; }
  int floored_count() const { return floored_; }

 private:
  int omega_;
  int nodes_;
  int floored_ = 0;
  std::vector<PairKernel> data_;
};

/// Normalised projection measure. weight[j] = dPhi_j / Z_Phi, so a bracket is
/// [X] = sum_j weight[j] X_j. Z_Phi = Tr(e^{-H0/T} P) / Tr(e^{-H0/T}).
struct GaugeMeasure {
  std::vector<cplx> log_dphi;  // ln dPhi_j including the base weight
  std::vector<cplx> weight;
  double log_z = 0.0;
  double imag_ratio = 0.0;   // |Im Z_Phi| / |Z_Phi|
  double cancellation = 1.0; // sum_j |dPhi_j| / Z_Phi

  double z() const { return std::exp(log_z); }
  int size() const { return static_cast<int>(weight.size()); }
  cplx dphi(int j) const { return std::exp(log_dphi[j]); }
};

inline constexpr double kMeasureImagTolerance = 1e-10;

/// Product over pairs is accumulated as a sum of complex logarithms. Only
/// exp(sum) is ever used, so the branch of each logarithm is immaterial.
inline GaugeMeasure measure(const KernelTable& table, const GaugeGrid& grid) {
  const int L = grid.size();
  GaugeMeasure m;
  m.log_dphi.resize(L);
  m.weight.resize(L);
  double max_re = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < L; ++j) {
    cplx acc(std::log(grid.base_weights[j]), grid.nodes[j] * (grid.n - grid.omega));
    for (const auto& K : table.node(j)) acc += std::log(K.zeta);
    m.log_dphi[j] = acc;
    max_re = std::max(max_re, acc.real());
  }
  cplx sum(0.0);
  double abs_sum = 0.0;
  for (int j = 0; j < L; ++j) {
    m.weight[j] = std::exp(m.log_dphi[j] - max_re);
    sum += m.weight[j];
    abs_sum += std::abs(m.weight[j]);
  }
  if (!(sum.real() > 0.0)) {
    throw ProjectionBreakdown("projected norm Z_Phi is not positive; state incompatible with n");
  }
  m.imag_ratio = std::abs(sum.imag()) / std::abs(sum);
  m.cancellation = abs_sum / sum.real();
  // Roundoff in the node sum scales with sum |dPhi_j|, not with Z_Phi.
  if (m.imag_ratio > kMeasureImagTolerance * std::max(1.0, m.cancellation)) {
    throw ProjectionBreakdown("projected norm Z_Phi has an imaginary part above tolerance");
  }
  const double inv = 1.0 / sum.real();
  for (auto& w : m.weight) w *= inv;
  m.log_z = max_re + std::log(sum.real());
  return m;
}

inline GaugeMeasure measure(const VariationalState& state, const GaugeGrid& grid) {
  return measure(KernelTable(state, grid), grid);
}

/// Accumulates brackets and records the largest imaginary residual seen.
class GaugeAverager {
 public:
  explicit GaugeAverager(const GaugeMeasure& m) : m_(&m) {}

  double operator()(std::span<const cplx> values) {
    if (static_cast<int>(values.size()) != m_->size()) throw InvalidArgument("gauge_average: size mismatch");
    cplx acc(0.0);
    for (std::size_t j = 0; j < values.size(); ++j) acc += m_->weight[j] * values[j];
    track(acc);
    return acc.real();
  }

  /// Bracket of a per-node value produced by `fn(j)`.
  template <class Fn>
  double of(Fn&& fn) {
    cplx acc(0.0);
    for (int j = 0; j < m_->size(); ++j) acc += m_->weight[j] * fn(j);
    track(acc);
    return acc.real();
  }

  double max_imag() const { return max_imag_; }

 private:
  void track(cplx acc) {
    max_imag_ = std::max(max_imag_, std::abs(acc.imag()) / std::max(1.0, std::abs(acc.real())));
  }
  const GaugeMeasure* m_;
  double max_imag_ = 0.0;
};

inline constexpr double kBracketImagTolerance = 1e-8;

/// [X]_phi = sum_j dPhi_j X_j / Z_Phi (real part); rejects a non-negligible
/// imaginary residual, which signals a non-Hermitian or malformed integrand.
inline double gauge_average(std::span<const cplx> values, const GaugeMeasure& m) {
  GaugeAverager avg(m);
  const double r = avg(values);
  if (avg.max_imag() > kBracketImagTolerance) {
    throw ProjectionBreakdown("gauge_average: imaginary residual above tolerance");
  }
  return r;
}

}  // namespace pairtherm
