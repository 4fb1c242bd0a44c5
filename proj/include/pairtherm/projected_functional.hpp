#pragma once

// Projected free energy F~ = E_C - T S~ and its stationarity conditions.
//
// All brackets use the normalised measure from gauge_kernel.hpp, so the same
// code serves the grand-canonical limit (single node at phi = 0), the
// number-parity projection and the full number projection.
//
// Variables are the symmetric pair amplitudes v_k and occupations f_k = f_kbar.
// With L_k = d ln zeta_k / d f_k and M_k = d ln zeta_k / d v_k the exact
// partial derivatives of F~ are
//   dF/df_k (one state k)  = rhs_k - sum_{k'} eps_{k'} d f^C_{k'} / d f_k
//   dF/dv_k                = (2 (1 - 2 f_k) / u_k) (2 u_k v_k h~_k - (u_k^2 - v_k^2) D~_k)
// where rhs, the Jacobian, D~ (delta_tilde) and h~ (h_tilde) are assembled
// below. Moving f_k and f_kbar together doubles the first line.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "pairtherm/energy_functional.hpp"
#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/pairing_model.hpp"

namespace pairtherm {

inline constexpr double kHalfFillingGuard = 1e-10;  // lower bound on |1 - 2 f_k|

struct Evaluation {
  int omega = 0;
  double T = 0.0;

  double F = 0.0;  // F~_C
  double E = 0.0;  // E_C = [E^phi]
  double S = 0.0;  // S~_C
  double log_z_phi = 0.0;
  double bb = 0.0;      // [<B^dag B>^phi]
  double n_mean = 0.0;  // [<N>^phi]
  double n_var = 0.0;   // [<N^2>^phi] - n_mean^2

  std::vector<double> f;               // f_k
  std::vector<double> fc;              // f_k^C
  std::vector<double> lbar;            // [d ln zeta_k / d f_k]
  std::vector<double> occupation;      // <N_k>
  std::vector<double> occupation_bar;  // <N_kbar>

  double imag_residual = 0.0;
  double cancellation = 1.0;
  int floored_nodes = 0;

  bool has_variation = false;
  /// jacobian(k, p) = d f^C_p / d f_k with f_k = f_kbar moved together.
  Eigen::MatrixXd jacobian;
  std::vector<double> rhs;          // right side of the quasiparticle-energy equation
  std::vector<double> delta_tilde;
  std::vector<double> h_tilde;
  std::vector<double> residual_f;   // rhs - jacobian * eps = (1/2) dF/df_k (symmetric move)
  std::vector<double> grad_v;       // dF/dv_k
  std::vector<double> grad_theta;   // dF/dtheta_k with v = sin(theta)
  int pinned_levels = 0;            // levels with |1 - 2 f| at the guard

  double qp_number() const {
    double s = 0.0;
    for (double x : fc) s += 2.0 * x;
    return s;
  }
};

namespace detail {

inline void check_inputs(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels) {
  validate(state);
  if (state.size() != levels.omega) throw InvalidArgument("state size does not match level scheme");
  if (grid.omega != levels.omega) throw InvalidArgument("grid omega does not match level scheme");
  if (!(state.T > 0.0)) throw InvalidArgument("projected functional needs T > 0");
}

}  // namespace detail

inline Evaluation evaluate(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                           const ModelParams& model, bool with_variation = true) {
  detail::check_inputs(state, grid, levels);
  const int omega = levels.omega;
  const int L = grid.size();
  const double T = state.T;

  const KernelTable table(state, grid);
  const GaugeMeasure m = measure(table, grid);

  Evaluation ev;
  ev.omega = omega;
  ev.T = T;
  ev.log_z_phi = m.log_z;
  ev.cancellation = m.cancellation;
  ev.floored_nodes = table.floored_count();
  ev.imag_residual = m.imag_ratio;

  std::vector<GaugeFields> fields(L);
  for (int j = 0; j < L; ++j) fields[j] = fields_at_angle(levels, model, table.node(j));

  GaugeAverager avg(m);
  ev.E = avg.of([&](int j) { return fields[j].E; });
  ev.bb = avg.of([&](int j) { return fields[j].bb; });
  ev.n_mean = avg.of([&](int j) {
    cplx s(0.0);
    for (const auto& K : table.node(j)) s += K.rho + K.rho_bar;
    return s;
  });
  const double n2 = avg.of([&](int j) {
    cplx sum(0.0), sq(0.0), pair2(0.0);
    for (const auto& K : table.node(j)) {
      const cplx np = K.rho + K.rho_bar;
      sum += np;
      sq += np * np;
      pair2 += np + 2.0 * (K.rho * K.rho_bar + K.kappa * K.kappa_bar);
    }
    return sum * sum - sq + pair2;
  });
  ev.n_var = n2 - ev.n_mean * ev.n_mean;

  ev.f.resize(omega);
  ev.fc.resize(omega);
  ev.lbar.resize(omega);
  ev.occupation.resize(omega);
  ev.occupation_bar.resize(omega);
  double entropy_energy = 0.0;  // (1/T) sum over 2 omega states of eps f^C
  double log_z0 = 0.0;
  for (int k = 0; k < omega; ++k) {
    ev.f[k] = state.f(k);
    ev.lbar[k] = avg.of([&](int j) { return table.at(j, k).dlnzeta_df; });
    ev.occupation[k] = avg.of([&](int j) { return table.at(j, k).rho; });
    ev.occupation_bar[k] = avg.of([&](int j) { return table.at(j, k).rho_bar; });
    ev.fc[k] = ev.f[k] + state.f_variance(k) * ev.lbar[k];
    const double x = state.eps[k] / T;
    if (ev.fc[k] != 0.0) entropy_energy += 2.0 * x * ev.fc[k];
    log_z0 += 2.0 * log1p_exp_neg(x);
  }
  ev.S = entropy_energy + log_z0 + m.log_z;
  ev.F = ev.E - T * ev.S;
  ev.imag_residual = std::max(ev.imag_residual, avg.max_imag());
  if (!with_variation) return ev;

  // ---- stationarity conditions --------------------------------------------
  ev.has_variation = true;
  const double E_C = ev.E;
  std::vector<cplx> ep(L), em(L), isin(L);
  for (int j = 0; j < L; ++j) {
    ep[j] = cplx(std::cos(grid.nodes[j]), std::sin(grid.nodes[j]));
    em[j] = std::conj(ep[j]);
    isin[j] = cplx(0.0, std::sin(grid.nodes[j]));
  }

  // weight over zeta: dPhi_j / (Z_Phi zeta_jk)
  std::vector<cplx> wz(static_cast<std::size_t>(L) * omega);
  for (int j = 0; j < L; ++j)
    for (int k = 0; k < omega; ++k) wz[static_cast<std::size_t>(j) * omega + k] = m.weight[j] / table.at(j, k).zeta;

  std::vector<double> sigma(omega), B(omega);
  for (int k = 0; k < omega; ++k) {
    sigma[k] = state.eps[k] * state.f_variance(k);
    B[k] = state.one_minus_f(k) - state.f(k);
    if (std::abs(B[k]) < kHalfFillingGuard) {
      B[k] = std::copysign(kHalfFillingGuard, B[k] == 0.0 ? 1.0 : B[k]);
      ++ev.pinned_levels;
    }
  }

  ev.rhs.assign(omega, 0.0);
  ev.delta_tilde.assign(omega, 0.0);
  ev.h_tilde.assign(omega, 0.0);
  std::vector<double> T1(omega), W(omega), Ccos(omega);
  double max_imag = 0.0;
  auto take = [&max_imag](cplx z) {
    max_imag = std::max(max_imag, std::abs(z.imag()) / std::max(1.0, std::abs(z.real())));
    return z.real();
  };

  for (int k = 0; k < omega; ++k) {
    const double v = state.v[k];
    const double u = state.u(k);
    const double fb = state.f(k);  // f_kbar = f_k
    cplx r1(0.0), r2(0.0), dt(0.0), t1(0.0), w(0.0), cc(0.0);
    for (int j = 0; j < L; ++j) {
      const auto& Fj = fields[j];
      const auto& K = table.at(j, k);
      const cplx z = wz[static_cast<std::size_t>(j) * omega + k];
      const cplx hs = Fj.h[k] + Fj.h_bar[k];
      const cplx pair_term = Fj.delta * em[j] + Fj.delta_bar * ep[j];
      r1 += z * (Fj.h[k] - hs * (fb - (fb - v * v) * em[j]) + u * v * pair_term);
      const cplx shifted = Fj.D[k] - Fj.E + E_C;
      r2 += m.weight[j] * shifted * K.dlnzeta_df;
      dt += z * pair_term;
      t1 += z * (0.5 * hs * em[j] + (shifted + T) * isin[j]);
      w += z * isin[j];
      cc += z * (1.0 - ep[j].real());
    }
    ev.rhs[k] = take(r1) - take(r2);
    ev.delta_tilde[k] = 0.5 * take(dt);
    T1[k] = take(t1);
    W[k] = take(w);
    Ccos[k] = take(cc);
  }

  // LL(k, p) = [L_k L_p],  X(p, k) = [L_p i sin(phi) / zeta_k]
  Eigen::MatrixXd LL = Eigen::MatrixXd::Zero(omega, omega);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(omega, omega);
  if (grid.kind != Projection::none) {
    Eigen::MatrixXcd accLL = Eigen::MatrixXcd::Zero(omega, omega);
    Eigen::MatrixXcd accX = Eigen::MatrixXcd::Zero(omega, omega);
    Eigen::VectorXcd Lj(omega), wLj(omega), zs(omega);
    for (int j = 0; j < L; ++j) {
      for (int k = 0; k < omega; ++k) {
        Lj[k] = table.at(j, k).dlnzeta_df;
        wLj[k] = m.weight[j] * Lj[k];
        zs[k] = wz[static_cast<std::size_t>(j) * omega + k] * isin[j];
      }
      accLL.noalias() += wLj * Lj.transpose();
      accX.noalias() += Lj * zs.transpose();
    }
    for (int a = 0; a < omega; ++a)
      for (int b = 0; b < omega; ++b) {
        LL(a, b) = take(accLL(a, b));
        X(a, b) = take(accX(a, b));
      }
  }

  ev.jacobian.resize(omega, omega);
  for (int k = 0; k < omega; ++k) {
    const double fv = state.f_variance(k);
    const double lb = ev.lbar[k];
    for (int p = 0; p < omega; ++p) {
      if (p == k) {
        ev.jacobian(k, k) = 1.0 + B[k] * lb - 2.0 * fv * lb * lb - 2.0 * fv * Ccos[k];
      } else {
        ev.jacobian(k, p) = 2.0 * state.f_variance(p) * (LL(k, p) - lb * ev.lbar[p]);
      }
    }
  }

  ev.residual_f.resize(omega);
  ev.grad_v.resize(omega);
  ev.grad_theta.resize(omega);
  for (int k = 0; k < omega; ++k) {
    double s = 0.0;
    for (int p = 0; p < omega; ++p) s += ev.jacobian(k, p) * state.eps[p];
    ev.residual_f[k] = ev.rhs[k] - s;

    double coupled = 2.0 * sigma[k] * ev.lbar[k] * W[k];
    for (int p = 0; p < omega; ++p) {
      if (p == k) continue;
      coupled += 2.0 * sigma[p] * (ev.lbar[p] * W[k] - X(p, k));
    }
    const double own = 2.0 * sigma[k] * W[k];  // carries the 1/(1 - f_k - f_kbar) factor
    ev.h_tilde[k] = T1[k] - coupled - own / B[k];

    const double v = state.v[k];
    const double u = state.u(k);
    const double u2mv2 = u * u - v * v;
    // u * dF/dv, written without dividing by 1 - 2 f or by u.
    ev.grad_theta[k] = 4.0 * u * v * B[k] * (T1[k] - coupled) - 4.0 * u * v * own - 2.0 * B[k] * u2mv2 * ev.delta_tilde[k];
    ev.grad_v[k] = u > 0.0 ? ev.grad_theta[k] / u : std::numeric_limits<double>::infinity();
  }
  ev.imag_residual = std::max(ev.imag_residual, max_imag);
  return ev;
}

// ---- thin named entry points ----------------------------------------------

/// f_k^C = f_k + f_k (1 - f_k) [d ln zeta_k / d f_k].
inline std::vector<double> f_c(const VariationalState& state, const GaugeGrid& grid) {
  const KernelTable table(state, grid);
  const GaugeMeasure m = measure(table, grid);
  GaugeAverager avg(m);
  std::vector<double> out(state.size());
  for (int k = 0; k < state.size(); ++k) {
    const double lb = avg.of([&](int j) { return table.at(j, k).dlnzeta_df; });
    out[k] = state.f(k) + state.f_variance(k) * lb;
  }
  return out;
}

/// S~_C = (1/T) sum_k eps_k f_k^C + ln Z_0 + ln Z_Phi (sums over 2 omega states).
inline double entropy_tilde(const VariationalState& state, const GaugeGrid& grid) {
  if (!(state.T > 0.0)) throw InvalidArgument("entropy_tilde: T must be > 0");
  const auto fc = f_c(state, grid);
  const GaugeMeasure m = measure(state, grid);
  double s = m.log_z;
  for (int k = 0; k < state.size(); ++k) {
    const double x = state.eps[k] / state.T;
    if (fc[k] != 0.0) s += 2.0 * x * fc[k];
    s += 2.0 * log1p_exp_neg(x);
  }
  return s;
}

inline double energy_projected(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                               const ModelParams& model) {
  return evaluate(state, grid, levels, model, false).E;
}

inline double free_energy_tilde(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                                const ModelParams& model) {
  return evaluate(state, grid, levels, model, false).F;
}

inline Eigen::MatrixXd occupation_jacobian(const VariationalState& state, const GaugeGrid& grid,
                                           const LevelScheme& levels, const ModelParams& model) {
  return evaluate(state, grid, levels, model, true).jacobian;
}

inline std::vector<double> qp_energy_rhs(const VariationalState& state, const GaugeGrid& grid,
                                         const LevelScheme& levels, const ModelParams& model) {
  return evaluate(state, grid, levels, model, true).rhs;
}

inline std::vector<double> gap_tilde(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                                     const ModelParams& model) {
  return evaluate(state, grid, levels, model, true).delta_tilde;
}

inline std::vector<double> h_tilde(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                                   const ModelParams& model) {
  return evaluate(state, grid, levels, model, true).h_tilde;
}

struct QpSolve {
  std::vector<double> eps;
  double rcond = 0.0;
  bool ok = false;
};

inline constexpr double kJacobianMinRcond = 1e-12;

/// Solves jacobian^T-contracted system sum_p A(k,p) eps_p = rhs_k.
inline QpSolve solve_qp_energies(const Evaluation& ev) {
  if (!ev.has_variation) throw InvalidArgument("solve_qp_energies: evaluation lacks variational data");
  QpSolve out;
  const int n = ev.omega;
  Eigen::Map<const Eigen::VectorXd> rhs(ev.rhs.data(), n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(ev.jacobian);
  out.rcond = lu.rcond();
  out.ok = std::isfinite(out.rcond) && out.rcond > kJacobianMinRcond;
  if (!out.ok) return out;
  Eigen::VectorXd x = lu.solve(rhs);
  out.eps.assign(x.data(), x.data() + n);
  for (double e : out.eps)
    if (!std::isfinite(e)) out.ok = false;
  return out;
}

inline QpSolve solve_qp_energies(const VariationalState& state, const GaugeGrid& grid, const LevelScheme& levels,
                                 const ModelParams& model) {
  return solve_qp_energies(evaluate(state, grid, levels, model, true));
}

/// v_k^2 = (1 - h~ / sqrt(h~^2 + D~^2)) / 2, clamped to [0, 1]; 1/2 when both vanish.
inline double update_v2(double h, double delta) {
  const double r = std::hypot(h, delta);
  if (r == 0.0) return 0.5;
  return std::clamp(0.5 * (1.0 - h / r), 0.0, 1.0);
}

inline std::vector<double> update_v(std::span<const double> h, std::span<const double> delta) {
  if (h.size() != delta.size()) throw InvalidArgument("update_v: size mismatch");
  std::vector<double> v2(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) v2[k] = update_v2(h[k], delta[k]);
  return v2;
}

}  // namespace pairtherm
