#pragma once

// Solvers for the four schemes:
//   gce    - grand-canonical BCS (single node, mu from the number condition)
//   parity - number-parity projection, mu adjusted until <N>_pi = n
//   ce     - variation after full number projection (minimum of F~_C)
//   vbp    - projected observables evaluated at the GCE optimum
//
// The CE minimizer iterates the stationarity conditions as a fixed-point map
//   eps <- A^{-1} rhs,   v^2 <- (1 - h~/sqrt(h~^2 + D~^2)) / 2
// in the variables (theta, eps) with v = sin(theta), accelerated by Anderson
// mixing. A step is accepted only if F~ does not increase; otherwise plain
// damped steps and finally a preconditioned steepest-descent step with
// backtracking are tried.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pairtherm/error.hpp"
#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/gce.hpp"
#include "pairtherm/pairing_model.hpp"
#include "pairtherm/projected_functional.hpp"
#include "pairtherm/thermal_report.hpp"

namespace pairtherm {

struct SolverConfig {
  int max_iter = 5000;
  double tol_state = 1e-9;
  double tol_grad = 1e-6;
  double mixing = 0.5;
  double descent_step = 0.1;
  double fd_step = 1e-5;
  int anderson_depth = 6;
  double number_tolerance = 1e-9;  // |<N> - n| for the parity scheme
  int max_mu_iter = 40;

  void validate() const {
    if (max_iter <= 0) throw InvalidArgument("solver: max_iter must be > 0");
    if (!(tol_state > 0.0) || !(tol_grad > 0.0)) throw InvalidArgument("solver: tolerances must be > 0");
    if (!(mixing > 0.0 && mixing <= 1.0)) throw InvalidArgument("solver: mixing must lie in (0, 1]");
    if (!(descent_step > 0.0) || !(fd_step > 0.0)) throw InvalidArgument("solver: steps must be > 0");
    if (anderson_depth < 0) throw InvalidArgument("solver: anderson_depth must be >= 0");
    if (!(number_tolerance > 0.0) || max_mu_iter <= 0) throw InvalidArgument("solver: bad number-condition settings");
  }
};

/// Largest stationarity residual: |dF/dtheta_k| and |dF/df_k| (symmetric move).
inline double gradient_residual(const Evaluation& ev) {
  double r = 0.0;
  for (int k = 0; k < ev.omega; ++k) r = std::max({r, std::abs(ev.grad_theta[k]), std::abs(2.0 * ev.residual_f[k])});
  return r;
}

struct Minimum {
  VariationalState state;
  Evaluation ev;
  ConvergenceInfo info;
};

namespace detail {

inline constexpr double kHalfPi = std::numbers::pi / 2.0;

inline Eigen::VectorXd pack(const VariationalState& s) {
  const int n = s.size();
  Eigen::VectorXd x(2 * n);
  for (int k = 0; k < n; ++k) {
    x[k] = std::asin(std::clamp(s.v[k], 0.0, 1.0));
    x[n + k] = s.eps[k];
  }
  return x;
}

inline VariationalState unpack(const Eigen::VectorXd& x, double T) {
  const int n = static_cast<int>(x.size() / 2);
  VariationalState s;
  s.T = T;
  s.v.resize(n);
  s.eps.resize(n);
  for (int k = 0; k < n; ++k) {
    s.v[k] = std::sin(std::clamp(x[k], 0.0, kHalfPi));
    s.eps[k] = x[n + k];
  }
  return s;
}

inline void clamp_angles(Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size() / 2);
  for (int k = 0; k < n; ++k) x[k] = std::clamp(x[k], 0.0, kHalfPi);
}

inline constexpr double kNullSpaceThreshold = 1e-10;

/// Fixed-point image of the stationarity conditions. When the occupation
/// Jacobian is singular the eps update is the minimum-norm correction
/// eps + A^+ (rhs - A eps). Exact null directions exist: with every v_k in
/// {0, 1} a shift of H0 by a multiple of N is invisible under projection, and
/// levels with f(1 - f) ~ 0 drop out of A.
inline std::optional<Eigen::VectorXd> fixed_point_image(const Evaluation& ev, const Eigen::VectorXd& x) {
  const int n = ev.omega;
  Eigen::VectorXd y(2 * n);
  const auto q = solve_qp_energies(ev);
  if (q.ok) {
    for (int k = 0; k < n; ++k) y[n + k] = q.eps[k];
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(kNullSpaceThreshold);
    cod.compute(ev.jacobian);
    Eigen::Map<const Eigen::VectorXd> r(ev.residual_f.data(), n);
    const Eigen::VectorXd d = cod.solve(r);
    if (!d.allFinite()) return std::nullopt;
    y.tail(n) = x.tail(n) + d;
  }
  for (int k = 0; k < n; ++k) {
    const double v2 = update_v2(ev.h_tilde[k], ev.delta_tilde[k]);
    y[k] = std::isfinite(v2) ? std::asin(std::sqrt(v2)) : x[k];
  }
  return y;
}

struct Trial {
  bool ok = false;
  VariationalState state;
  Evaluation ev;
};

inline Trial try_point(const Eigen::VectorXd& x, double T, const GaugeGrid& grid, const LevelScheme& levels,
                       const ModelParams& model) {
  Trial t;
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) return t;
  t.state = unpack(x, T);
  try {
    t.ev = evaluate(t.state, grid, levels, model, true);
  } catch (const ProjectionBreakdown&) {
    return t;
  }
  t.ok = std::isfinite(t.ev.F);
  return t;
}

// Change measured in (theta, f): eps of a level with f ~ 0 is unconstrained
// by F~ and may drift without affecting anything.
inline double state_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double T) {
  const int n = static_cast<int>(a.size() / 2);
  double c = 0.0;
  for (int k = 0; k < n; ++k) {
    c = std::max(c, std::abs(a[k] - b[k]));
    c = std::max(c, std::abs(fermi(a[n + k] / T) - fermi(b[n + k] / T)));
  }
  return c;
}

}  // namespace detail

/// Minimizes F~ on `grid` from `start`. F~ never increases across accepted steps.
inline Minimum minimize_from(const VariationalState& start, const GaugeGrid& grid, const LevelScheme& levels,
                             const ModelParams& model, const SolverConfig& config) {
  config.validate();
  validate(levels, model);
  const double T = start.T;
  if (!(T > 0.0)) throw InvalidArgument("minimize: T must be > 0");
  const int n = levels.omega;

  Eigen::VectorXd x = detail::pack(start);
  detail::clamp_angles(x);
  auto cur = detail::try_point(x, T, grid, levels, model);
  if (!cur.ok) throw ProjectionBreakdown("minimize: starting state has no weight in the projected sector");

  Minimum out;
  std::deque<Eigen::VectorXd> hx, hr;  // Anderson history of iterates and residuals
  double step = config.descent_step;
  int descent = 0;
  int it = 0;
  double change = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::string note;

  for (; it < config.max_iter; ++it) {
    const double slack = 1e-12 * (1.0 + std::abs(cur.ev.F));
    const double grad = gradient_residual(cur.ev);
    if (change < config.tol_state && grad < config.tol_grad) {
      converged = true;
      break;
    }

    std::optional<Eigen::VectorXd> image = detail::fixed_point_image(cur.ev, x);
    Eigen::VectorXd next;
    detail::Trial accepted;

    if (image) {
      const Eigen::VectorXd r = *image - x;
      hx.push_back(x);
      hr.push_back(r);
      while (static_cast<int>(hx.size()) > config.anderson_depth + 1) {
        hx.pop_front();
        hr.pop_front();
      }
      std::vector<Eigen::VectorXd> candidates;
      const int m = static_cast<int>(hx.size()) - 1;
      if (m > 0) {
        Eigen::MatrixXd dX(2 * n, m), dR(2 * n, m);
        for (int i = 0; i < m; ++i) {
          dX.col(i) = hx[i + 1] - hx[i];
          dR.col(i) = hr[i + 1] - hr[i];
        }
        const Eigen::VectorXd gamma = dR.completeOrthogonalDecomposition().solve(r);
        Eigen::VectorXd xa = x + config.mixing * r - (dX + config.mixing * dR) * gamma;
        detail::clamp_angles(xa);
        candidates.push_back(std::move(xa));
      }
      for (double beta = config.mixing; beta > config.mixing / 17.0; beta *= 0.5) {
        Eigen::VectorXd xb = x + beta * r;
        detail::clamp_angles(xb);
        candidates.push_back(std::move(xb));
      }
      for (auto& c : candidates) {
        auto t = detail::try_point(c, T, grid, levels, model);
        if (t.ok && t.ev.F <= cur.ev.F + slack) {
          accepted = std::move(t);
          next = c;
          break;
        }
      }
    }

    if (!accepted.ok) {
      // Preconditioned steepest descent: -dF/dtheta for the angles, and the
      // quasiparticle-equation residual for eps (dF/deps = -2 f(1-f)/T * residual).
      hx.clear();
      hr.clear();
      Eigen::VectorXd d(2 * n);
      for (int k = 0; k < n; ++k) {
        d[k] = -cur.ev.grad_theta[k];
        d[n + k] = cur.ev.residual_f[k];
      }
      const double dn = d.cwiseAbs().maxCoeff();
      if (!(dn > 0.0)) {
        note = "stationary point with zero descent direction";
        change = 0.0;
        converged = grad < config.tol_grad;
        break;
      }
      double s = step;
      for (int ls = 0; ls < 40; ++ls, s *= 0.5) {
        Eigen::VectorXd c = x + (s / dn) * d;
        detail::clamp_angles(c);
        auto t = detail::try_point(c, T, grid, levels, model);
        if (t.ok && t.ev.F < cur.ev.F) {
          accepted = std::move(t);
          next = c;
          break;
        }
      }
      ++descent;
      if (!accepted.ok) {
        note = "line search exhausted";
        change = 0.0;
        converged = grad < config.tol_grad;
        break;
      }
      step = std::min(1.0, 2.0 * s);
    }

    change = detail::state_change(next, x, T);
    x = next;
    cur = std::move(accepted);
  }

  out.state = cur.state;
  out.ev = std::move(cur.ev);
  out.info.converged = converged;
  out.info.iterations = it;
  out.info.grad_residual = gradient_residual(out.ev);
  out.info.state_change = change;
  out.info.descent_steps = descent;
  out.info.pinned_levels = out.ev.pinned_levels;
  out.info.floored_nodes = out.ev.floored_nodes;
  if (!converged && note.empty()) note = "max_iter reached";
  if (out.ev.pinned_levels > 0) note += note.empty() ? "level pinned at f = 1/2" : "; level pinned at f = 1/2";
  out.info.note = note;
  return out;
}

// ---- starts -----------------------------------------------------------------

/// Paired seed: BCS profile with unit gap around the Fermi level of the
/// uncorrelated n-particle ground state.
inline VariationalState paired_seed(const LevelScheme& levels, int n, double T, double gap = 1.0) {
  std::vector<double> sorted = levels.t;
  std::sort(sorted.begin(), sorted.end());
  const int half = n / 2;
  double ef;
  if (half <= 0) ef = sorted.front() - gap;
  else if (half >= levels.omega) ef = sorted.back() + gap;
  else ef = 0.5 * (sorted[half - 1] + sorted[half]);
  VariationalState s;
  s.T = T;
  for (double t : levels.t) {
    const double e = t - ef;
    const double E = std::hypot(e, gap);
    s.v.push_back(std::sqrt(0.5 * (1.0 - e / E)));
    s.eps.push_back(E);
  }
  return s;
}

// ---- schemes ------------------------------------------------------------------

/// Model with mu replaced by the effective chemical potential used in the fields.
inline ModelParams with_mu(ModelParams m, double mu) {
  m.mu = mu;
  return m;
}

inline ThermalReport report_for(Scheme scheme, const VariationalState& state, const GaugeGrid& grid,
                                const LevelScheme& levels, const ModelParams& model, ConvergenceInfo info,
                                double mu_eff) {
  const auto ev = evaluate(state, grid, levels, model, true);
  return make_report(scheme, ev, state, model, std::move(info), mu_eff);
}

/// Grand-canonical BCS. Energies are reported with the model's mu.
inline ThermalReport solve_gce_bcs(const LevelScheme& levels, const ModelParams& model, double T,
                                   MuMode mode = MuMode::number, std::optional<double> mu_guess = std::nullopt) {
  if (!(T > 0.0)) throw InvalidArgument("solve_gce_bcs: T must be > 0");
  const auto sol = solve_gce_fields(levels, model, T, mode, mu_guess);
  ConvergenceInfo info;
  info.converged = true;
  auto r = report_for(Scheme::gce, sol.state, GaugeGrid::none(model.n, levels.omega), levels, model, info,
                      sol.mu_eff);
  r.convergence.grad_residual = gradient_residual(evaluate(sol.state, GaugeGrid::none(model.n, levels.omega), levels,
                                                           with_mu(model, sol.mu_eff)));
  return r;
}

/// GCE gap Delta_G = g <B>_G at temperature T.
inline double gce_gap(const LevelScheme& levels, const ModelParams& model, double T, MuMode mode = MuMode::number) {
  return solve_gce_fields(levels, model, T, mode).delta;
}

/// Variation after projection on `grid` (full projection for CE-BCS). With
/// no `init`, both the GCE state and a paired seed are minimized and the
/// lower F~ wins.
inline ThermalReport minimize_ce_bcs(const LevelScheme& levels, const ModelParams& model, double T,
                                     const GaugeGrid& grid, const SolverConfig& config,
                                     const std::optional<VariationalState>& init = std::nullopt) {
  if (!(T > 0.0)) throw InvalidArgument("minimize_ce_bcs: T must be > 0");
  std::vector<VariationalState> starts;
  if (init) {
    starts.push_back(*init);
    starts.back().T = T;
  } else {
    starts.push_back(solve_gce_fields(levels, model, T).state);
    starts.push_back(paired_seed(levels, model.n, T));
  }
  std::optional<Minimum> best;
  std::string failures;
  for (const auto& s : starts) {
    try {
      auto m = minimize_from(s, grid, levels, model, config);
      const bool better = !best || (m.info.converged && !best->info.converged) ||
                          (m.info.converged == best->info.converged && m.ev.F < best->ev.F);
      if (better) best = std::move(m);
    } catch (const ProjectionBreakdown& e) {
      failures += e.what();
    }
  }
  if (!best) throw ProjectionBreakdown("minimize_ce_bcs: every start failed: " + failures);
  const Scheme scheme = grid.kind == Projection::none ? Scheme::gce
                        : grid.kind == Projection::parity ? Scheme::parity
                                                          : Scheme::ce;
  return make_report(scheme, best->ev, best->state, model, best->info, model.mu);
}

/// Number-parity projection with mu solved from <N>_pi = n by a secant
/// iteration; each mu needs its own minimization (warm-started).
inline ThermalReport solve_parity_bcs(const LevelScheme& levels, const ModelParams& model, double T,
                                      const SolverConfig& config,
                                      const std::optional<VariationalState>& init = std::nullopt,
                                      std::optional<double> mu_guess = std::nullopt) {
  const auto grid = GaugeGrid::parity(model.n, levels.omega);
  const auto gce = solve_gce_fields(levels, model, T, MuMode::number, mu_guess);
  double mu = mu_guess.value_or(gce.mu_eff);

  std::optional<VariationalState> warm = init;
  auto run = [&](double m) {
    const auto mm = with_mu(model, m);
    if (warm) return minimize_ce_bcs(levels, mm, T, grid, config, warm);
    // no warm start: GCE state and a paired seed
    std::vector<VariationalState> starts{gce.state, paired_seed(levels, model.n, T)};
    std::optional<ThermalReport> best;
    for (const auto& s : starts) {
      auto r = minimize_ce_bcs(levels, mm, T, grid, config, s);
      if (!best || r.F < best->F) best = std::move(r);
    }
    return *best;
  };

  ThermalReport r = run(mu);
  warm = r.state;
  double dn = r.n_mean - model.n;
  int iter = 0;
  if (std::abs(dn) > config.number_tolerance) {
    // d<N>/dmu > 0; bracket by stepping against the error, then secant.
    double mu_prev = mu, dn_prev = dn;
    double m2 = mu - std::copysign(0.05 * std::max(1.0, model.g), dn);
    for (; iter < config.max_mu_iter; ++iter) {
      r = run(m2);
      warm = r.state;
      const double d2 = r.n_mean - model.n;
      mu = m2;
      dn = d2;
      if (std::abs(d2) <= config.number_tolerance) break;
      const double slope = (d2 - dn_prev) / (m2 - mu_prev);
      double next = (slope > 0.0 && std::isfinite(slope)) ? m2 - d2 / slope
                                                          : m2 - std::copysign(0.05 * std::max(1.0, model.g), d2);
      mu_prev = m2;
      dn_prev = d2;
      m2 = next;
    }
  }
  // Report energies with the model mu; the fields were solved with mu_eff.
  auto out = report_for(Scheme::parity, r.state, grid, levels, model, r.convergence, mu);
  if (std::abs(dn) > config.number_tolerance) {
    out.convergence.converged = false;
    out.convergence.note += (out.convergence.note.empty() ? "" : "; ") + std::string("number condition not met");
  }
  return out;
}

/// Projected observables at the GCE optimum, without re-minimizing.
inline ThermalReport vbp_evaluate(const LevelScheme& levels, const ModelParams& model, double T,
                                  const GaugeGrid& grid, const ThermalReport& gce_report) {
  ConvergenceInfo info = gce_report.convergence;
  VariationalState s = gce_report.state;
  s.T = T;
  auto r = report_for(Scheme::vbp, s, grid, levels, model, info, gce_report.mu_eff);
  r.convergence.grad_residual = gradient_residual(evaluate(s, grid, levels, model));
  return r;
}

/// Dispatch by scheme. `init` warm-starts the projected minimizers.
inline ThermalReport solve_scheme(Scheme scheme, const LevelScheme& levels, const ModelParams& model, double T,
                                  const SolverConfig& config, int nodes = 0,
                                  const std::optional<VariationalState>& init = std::nullopt) {
  switch (scheme) {
    case Scheme::gce: return solve_gce_bcs(levels, model, T);
    case Scheme::parity: return solve_parity_bcs(levels, model, T, config, init);
    case Scheme::ce: return minimize_ce_bcs(levels, model, T, GaugeGrid::full(model.n, levels.omega, nodes), config, init);
    case Scheme::vbp:
      return vbp_evaluate(levels, model, T, GaugeGrid::full(model.n, levels.omega, nodes),
                          solve_gce_bcs(levels, model, T));
  }
  throw InvalidArgument("unknown scheme");
}

}  // namespace pairtherm
