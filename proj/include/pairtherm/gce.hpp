#pragma once

// Grand-canonical finite-temperature BCS with the same energy functional as
// the projected solvers (single gauge node). The self-consistency is solved
// by nested bracketing: for given (gap, mu) each level's density solves a
// scalar equation, the gap solves Delta = g sum_k u_k v_k (1 - 2 f_k), and in
// number mode mu is adjusted until 2 sum_k rho_k = n.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pairtherm/error.hpp"
#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/numerics.hpp"
#include "pairtherm/pairing_model.hpp"

namespace pairtherm {

enum class MuMode {
  fixed,   // use ModelParams::mu as given
  number,  // solve mu from <N>_G = n
};

struct GceSolution {
  double delta = 0.0;   // Delta_G = g <B>_G
  double mu_eff = 0.0;  // chemical potential the fields were solved with
  double T = 0.0;
  std::vector<double> h;    // h_k including the self-energy
  std::vector<double> rho;  // <N_k>
  VariationalState state;   // v_k and eps_k = sqrt(h_k^2 + Delta^2)
};

namespace detail {

/// tanh(E / 2T) / (2E), finite at E = 0 for T > 0.
inline double pair_susceptibility(double E, double T) {
  if (T <= 0.0) return E > 0.0 ? 0.5 / E : std::numeric_limits<double>::infinity();
  const double x = E / (2.0 * T);
  if (x < 1e-8) return 1.0 / (4.0 * T);
  return std::tanh(x) / (2.0 * E);
}

struct LevelSolution {
  double h, E, v2, f, rho;
};

inline LevelSolution level_at(double t_shifted, double self, double rho, double delta, double T) {
  LevelSolution s;
  s.rho = rho;
  s.h = t_shifted - self * rho;
  s.E = std::hypot(s.h, delta);
  s.v2 = std::clamp(s.E > 0.0 ? 0.5 * (1.0 - s.h / s.E) : 0.5, 0.0, 1.0);
  s.f = occupation(s.E, T);
  return s;
}

inline double density_of(const LevelSolution& s) { return s.v2 * (1.0 - 2.0 * s.f) + s.f; }

/// Self-consistent rho for one level: rho = v^2 (1 - 2f) + f with h = t - mu - g rho.
inline LevelSolution solve_level(double t_shifted, double self, double delta, double T) {
  if (self == 0.0) {
    auto s = level_at(t_shifted, 0.0, 0.0, delta, T);
    s.rho = density_of(s);
    return s;
  }
  auto q = [&](double r) { return r - density_of(level_at(t_shifted, self, r, delta, T)); };
  const double r = bracketed_root(q, 0.0, 1.0, 1e-15);
  return level_at(t_shifted, self, r, delta, T);
}

struct GapProblem {
  const LevelScheme& levels;
  double g;
  double self;
  double T;

  std::vector<LevelSolution> solve(double delta, double mu) const {
    std::vector<LevelSolution> out(levels.omega);
    for (int k = 0; k < levels.omega; ++k) out[k] = solve_level(levels.t[k] - mu, self, delta, T);
    return out;
  }

  /// g sum_k tanh(E/2T)/(2E) - 1; the non-trivial gap is its root.
  double gap_ratio(double delta, double mu) const {
    double s = 0.0;
    for (const auto& l : solve(delta, mu)) s += pair_susceptibility(l.E, T);
    return g * s - 1.0;
  }

  double gap(double mu) const {
    if (g == 0.0) return 0.0;
    const double r0 = gap_ratio(0.0, mu);
    if (!(r0 > 0.0)) return 0.0;
    double hi = 1.0;
    while (gap_ratio(hi, mu) > 0.0) {
      hi *= 2.0;
      if (hi > 1e12) throw ConvergenceError("gce: gap bracket diverged");
    }
    return bracketed_root([&](double d) { return gap_ratio(d, mu); }, 0.0, hi, 1e-15 * std::max(1.0, hi));
  }

  double particle_number(double mu) const {
    const double d = gap(mu);
    double n = 0.0;
    for (const auto& l : solve(d, mu)) n += 2.0 * l.rho;
    return n;
  }
};

}  // namespace detail

inline constexpr double kNumberTolerance = 1e-11;

/// Solves the grand-canonical fields at temperature T (T = 0 allowed).
/// `mu_guess` seeds number mode; the half-filled symmetric spectrum is solved
/// exactly by mu = mean(t) - g/2 when the diagonal contraction is kept.
inline GceSolution solve_gce_fields(const LevelScheme& levels, const ModelParams& model, double T,
                                    MuMode mode = MuMode::number, std::optional<double> mu_guess = std::nullopt) {
  validate(levels, model);
  if (T < 0.0) throw InvalidArgument("solve_gce_fields: negative temperature");
  const double self = model.wick_diagonal ? model.g : 0.0;
  detail::GapProblem P{levels, model.g, self, T};

  double mu = model.mu;
  if (mode == MuMode::number) {
    double guess;
    if (mu_guess) {
      guess = *mu_guess;
    } else {
      double mean = 0.0;
      for (double t : levels.t) mean += t;
      guess = mean / levels.omega - (model.n == levels.omega ? 0.5 * self : 0.0);
    }
    auto dn = [&](double m) { return P.particle_number(m) - model.n; };
    if (std::abs(dn(guess)) < kNumberTolerance) {
      mu = guess;
    } else {
      const double w = std::max({1.0, 4.0 * T, model.g});
      auto [a, b] = expand_bracket(dn, guess - w, guess + w);
      mu = bracketed_root(dn, a, b, 1e-14);
    }
  }

  GceSolution out;
  out.T = T;
  out.mu_eff = mu;
  out.delta = P.gap(mu);
  const auto sol = P.solve(out.delta, mu);
  out.state.T = T;
  out.state.v.resize(levels.omega);
  out.state.eps.resize(levels.omega);
  out.h.resize(levels.omega);
  out.rho.resize(levels.omega);
  for (int k = 0; k < levels.omega; ++k) {
    out.state.v[k] = std::sqrt(sol[k].v2);
    out.state.eps[k] = sol[k].E;
    out.h[k] = sol[k].h;
    out.rho[k] = sol[k].rho;
  }
  return out;
}

/// Zero-temperature grand-canonical gap for coupling g. Returns 0 when only
/// the trivial solution exists.
inline double zero_T_gce_gap(const LevelScheme& levels, double g, double mu, int n, MuMode mode = MuMode::number,
                             bool wick_diagonal = true) {
  if (g < 0.0) throw InvalidArgument("zero_T_gce_gap: g must be >= 0");
  ModelParams m{g, mu, n, wick_diagonal};
  return solve_gce_fields(levels, m, 0.0, mode).delta;
}

/// Coupling g for which the zero-temperature grand-canonical gap equals
/// `target_gap`. Delta(g) is monotone, so a bracketing solver is safe.
inline double calibrate_g(const LevelScheme& levels, int n, double target_gap, MuMode mode = MuMode::number,
                          bool wick_diagonal = true, double mu = 0.0) {
  if (!(target_gap > 0.0)) throw InvalidArgument("calibrate_g: target gap must be > 0");
  auto excess = [&](double g) { return zero_T_gce_gap(levels, g, mu, n, mode, wick_diagonal) - target_gap; };
  double hi = 0.1 * std::max(levels.d, 1e-3);
  while (excess(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e8) throw ConvergenceError("calibrate_g: target gap unreachable");
  }
  return bracketed_root(excess, 0.0, hi, 1e-15);
}

}  // namespace pairtherm
