#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/projected_functional.hpp"

namespace pairtherm {

enum class Scheme { gce, parity, ce, vbp };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::gce: return "gce";
    case Scheme::parity: return "parity";
    case Scheme::ce: return "ce";
    case Scheme::vbp: return "vbp";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "gce") return Scheme::gce;
  if (s == "parity") return Scheme::parity;
  if (s == "ce") return Scheme::ce;
  if (s == "vbp") return Scheme::vbp;
  throw InvalidArgument("unknown scheme '" + s + "'");
}

struct ConvergenceInfo {
  bool converged = false;
  int iterations = 0;
  double grad_residual = 0.0;  // max |stationarity residual|
  double state_change = 0.0;
  int pinned_levels = 0;
  int floored_nodes = 0;
  int descent_steps = 0;
  std::string note;
};

struct ThermalReport {
  Scheme scheme = Scheme::gce;
  int n = 0;
  double T = 0.0;
  double mu_eff = 0.0;

  double F = 0.0;
  double E = 0.0;
  double S = 0.0;
  double delta_av = 0.0;
  double delta_tilde_min = 0.0;
  double delta_tilde_max = 0.0;
  double qp_number = 0.0;
  double bb = 0.0;
  double n_mean = 0.0;
  double n_var = 0.0;
  double heat_capacity = std::numeric_limits<double>::quiet_NaN();

  double radicand = 0.0;        // <B^dag B> - sum_k <N_k><N_kbar>
  bool radicand_defect = false;  // radicand < 0, clamped

  std::vector<double> occupations;  // <N_k> per level
  std::vector<double> eps;
  std::vector<double> v;

  ConvergenceInfo convergence;
  VariationalState state;
};

struct Observables {
  double delta_av = 0.0;
  double radicand = 0.0;
  bool defect = false;
  double delta_tilde_min = 0.0;
  double delta_tilde_max = 0.0;
  double qp_number = 0.0;
  double bb = 0.0;
  std::vector<double> occupations;
};

inline constexpr double kRadicandTolerance = 1e-10;

/// Delta^av = g sqrt(<B^dag B> - sum_{k>0} <N_k><N_kbar>) with the brackets of
/// whichever ensemble produced `ev`; a negative radicand is clamped to zero
/// and marked as a defect.
inline Observables observables(const Evaluation& ev, const ModelParams& model) {
  Observables o;
  o.bb = ev.bb;
  o.qp_number = ev.qp_number();
  o.occupations = ev.occupation;
  double corr = 0.0;
  for (int k = 0; k < ev.omega; ++k) corr += ev.occupation[k] * ev.occupation_bar[k];
  o.radicand = ev.bb - corr;
  o.defect = o.radicand < -kRadicandTolerance;
  o.delta_av = model.g * std::sqrt(std::max(0.0, o.radicand));
  if (ev.has_variation && !ev.delta_tilde.empty()) {
    auto [lo, hi] = std::minmax_element(ev.delta_tilde.begin(), ev.delta_tilde.end());
    o.delta_tilde_min = *lo;
    o.delta_tilde_max = *hi;
  }
  return o;
}

inline ThermalReport make_report(Scheme scheme, const Evaluation& ev, const VariationalState& state,
                                 const ModelParams& model, ConvergenceInfo info, double mu_eff) {
  ThermalReport r;
  r.scheme = scheme;
  r.n = model.n;
  r.T = state.T;
  r.mu_eff = mu_eff;
  r.F = ev.F;
  r.E = ev.E;
  r.S = ev.S;
  r.n_mean = ev.n_mean;
  r.n_var = ev.n_var;
  const auto o = observables(ev, model);
  r.delta_av = o.delta_av;
  r.radicand = o.radicand;
  r.radicand_defect = o.defect;
  r.delta_tilde_min = o.delta_tilde_min;
  r.delta_tilde_max = o.delta_tilde_max;
  r.qp_number = o.qp_number;
  r.bb = o.bb;
  r.occupations = o.occupations;
  r.eps = state.eps;
  r.v = state.v;
  info.pinned_levels = std::max(info.pinned_levels, ev.pinned_levels);
  info.floored_nodes = std::max(info.floored_nodes, ev.floored_nodes);
  r.convergence = std::move(info);
  r.state = state;
  return r;
}

inline constexpr double kNormalThreshold = 1e-3;

/// Order parameter used for T^cr: Delta^av, or zero once the variational
/// pairing field max|Delta~_k| has collapsed. The second condition matters for
/// parity projection, whose normal state keeps a positive radicand from the
/// parity correlations alone.
inline double order_parameter(const ThermalReport& r) {
  const double field = std::max(std::abs(r.delta_tilde_min), std::abs(r.delta_tilde_max));
  return field < kNormalThreshold ? 0.0 : r.delta_av;
}

inline bool is_normal(const ThermalReport& r) { return order_parameter(r) < kNormalThreshold; }

// ---- heat capacity ---------------------------------------------------------

struct HeatCapacity {
  std::vector<double> T;
  std::vector<double> C;  // NaN where a point was excluded
  std::vector<std::size_t> gaps;  // indices of excluded (unconverged) points
  bool has_jump = false;
  double jump_T = std::numeric_limits<double>::quiet_NaN();  // grid point shared by the two slopes
  double jump = 0.0;          // C(right) - C(left) estimate
  double significance = 0.0;  // |jump| / median |step between consecutive slopes|
  bool has_s_shape = false;
  double inflection_T = std::numeric_limits<double>::quiet_NaN();  // convex -> concave, below jump_T
};

inline constexpr double kJumpSignificance = 5.0;
inline constexpr int kInflectionRun = 3;

/// C = dE/dT by finite differences over the converged points of a sweep:
/// central differences inside, one-sided at the ends. A discontinuity shows up
/// as an isolated step between consecutive forward differences.
inline HeatCapacity heat_capacity(std::span<const double> T, std::span<const double> E,
                                  std::span<const bool> converged = {}) {
  if (T.size() != E.size()) throw InvalidArgument("heat_capacity: size mismatch");
  HeatCapacity hc;
  hc.T.assign(T.begin(), T.end());
  hc.C.assign(T.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!converged.empty() && !converged[i]) {
      hc.gaps.push_back(i);
      continue;
    }
    idx.push_back(i);
  }
  const std::size_t m = idx.size();
  if (m < 2) return hc;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t lo = idx[a == 0 ? 0 : a - 1];
    const std::size_t hi = idx[a + 1 == m ? m - 1 : a + 1];
    hc.C[idx[a]] = (E[hi] - E[lo]) / (T[hi] - T[lo]);
  }
  if (m < 4) return hc;
  std::vector<double> slope(m - 1);
  for (std::size_t a = 0; a + 1 < m; ++a) slope[a] = (E[idx[a + 1]] - E[idx[a]]) / (T[idx[a + 1]] - T[idx[a]]);
  std::vector<double> step(m - 2);
  for (std::size_t a = 0; a + 2 < m; ++a) step[a] = slope[a + 1] - slope[a];
  std::vector<double> mags(step.size());
  for (std::size_t a = 0; a < step.size(); ++a) mags[a] = std::abs(step[a]);
  auto sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = std::max(sorted[sorted.size() / 2], 1e-300);
  const auto best = static_cast<std::size_t>(std::max_element(mags.begin(), mags.end()) - mags.begin());
  hc.jump = step[best];
  hc.significance = mags[best] / median;
  hc.jump_T = T[idx[best + 1]];
  hc.has_jump = hc.significance > kJumpSignificance;

  // S-shape: d2C/dT2 changes sign from + to - below the jump, each sign held
  // for kInflectionRun consecutive points so that roundoff flicker in the
  // thermal tail is not counted.
  const double limit = hc.has_jump ? hc.jump_T : std::numeric_limits<double>::infinity();
  std::vector<double> tc, cc;
  for (std::size_t a = 0; a < m; ++a) {
    if (T[idx[a]] >= limit) break;
    tc.push_back(T[idx[a]]);
    cc.push_back(hc.C[idx[a]]);
  }
  std::vector<int> sign;
  std::vector<double> at;
  for (std::size_t a = 1; a + 1 < tc.size(); ++a) {
    const double d1 = (cc[a + 1] - cc[a]) / (tc[a + 1] - tc[a]);
    const double d0 = (cc[a] - cc[a - 1]) / (tc[a] - tc[a - 1]);
    const double c2 = 2.0 * (d1 - d0) / (tc[a + 1] - tc[a - 1]);
    sign.push_back(c2 > 0.0 ? 1 : (c2 < 0.0 ? -1 : 0));
    at.push_back(tc[a]);
  }
  for (std::size_t a = kInflectionRun; a + kInflectionRun <= sign.size(); ++a) {
    bool ok = true;
    for (int b = 1; b <= kInflectionRun && ok; ++b) ok = sign[a - b] > 0 && sign[a + b - 1] < 0;
    if (ok) {
      hc.has_s_shape = true;
      hc.inflection_T = 0.5 * (at[a - 1] + at[a]);
      break;
    }
  }
  return hc;
}

}  // namespace pairtherm
