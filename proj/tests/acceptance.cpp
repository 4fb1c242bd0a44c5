// End-to-end acceptance run: one [PASS]/[FAIL] line per criterion.
// Usage: acceptance [--only 1,4,12]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pairtherm/exact_oracle.hpp"
#include "pairtherm/experiment.hpp"
#include "pbcs_oracle.hpp"
#include "test_support.hpp"

using namespace pairtherm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SolverConfig tight() {
  SolverConfig c;
  c.tol_grad = 1e-12;
  c.tol_state = 1e-13;
  c.max_iter = 20000;
  return c;
}

Problem half_filled(int n) { return make_problem(RunConfig{}, n); }

// Shared expensive runs, computed on first use.
struct Cache {
  std::optional<ScalingRun> scaling;
  std::map<int, TcritResult> parity;
  std::optional<std::vector<SweepSeries>> sweep26;

  const ScalingRun& scaling_run() {
    if (!scaling) scaling = run_scaling(RunConfig{});
    return *scaling;
  }
  double tcrit(Scheme s, int n) {
    const auto& run = scaling_run();
    const auto& ns = RunConfig{}.scaling.n_list;
    const auto i = static_cast<std::size_t>(std::find(ns.begin(), ns.end(), n) - ns.begin());
    if (s == Scheme::ce) return run.scheme_points.at(i).T_cr;
    if (s == Scheme::gce) return run.gce_points.at(i).T_cr;
    if (!parity.count(n)) parity[n] = find_tcrit(half_filled(n), Scheme::parity, TcritConfig{});
    return parity[n].T_cr;
  }
  const SweepSeries& series26(Scheme s) {
    if (!sweep26)
      sweep26 = run_sweep(half_filled(26), {Scheme::gce, Scheme::parity, Scheme::ce},
                          temperature_grid(0.05, 1.6, 0.01));
    for (const auto& x : *sweep26)
      if (x.scheme == s) return x;
    throw Error("missing series");
  }
};

Cache cache;

Outcome gce_calibration() {
  const auto p = half_filled(26);
  const double d = gce_gap(p.levels, p.model, 1e-4);
  return {std::abs(d - 1.0) <= 1e-3, format("Delta_G(T=1e-4) = %.9f, g = %.6f", d, p.model.g)};
}

Outcome gce_tcrit() {
  const double t = cache.tcrit(Scheme::gce, 26);
  return {std::abs(t - 0.6) <= 0.05, format("T_cr_G(26) = %.4f", t)};
}

Outcome gce_bulk() {
  const double a = cache.tcrit(Scheme::gce, 26), b = cache.tcrit(Scheme::gce, 56);
  return {std::abs(b - a) < 0.02, format("T_cr_G(26) = %.4f, T_cr_G(56) = %.4f, diff = %.4f", a, b, std::abs(b - a))};
}

Outcome ce_shift() {
  bool ok = true;
  std::string d;
  double prev_shift = INFINITY;
  for (int n : {10, 26}) {
    const double c = cache.tcrit(Scheme::ce, n), p = cache.tcrit(Scheme::parity, n), g = cache.tcrit(Scheme::gce, n);
    ok = ok && c > p && p > g && c - g < prev_shift;
    prev_shift = c - g;
    d += format("n=%d: C %.4f > pi %.4f > G %.4f (shift %.4f); ", n, c, p, g, c - g);
  }
  return {ok, d.substr(0, d.size() - 2)};
}

Outcome scaling_fit() {
  const auto& f = cache.scaling_run().fit;
  const bool ok = !f.degenerate && f.b >= 0.6 && f.b <= 0.9 && f.a >= 4.0 && f.a <= 10.0;
  std::string d = format("T_inf = %.4f, a = %.3f +- %.3f, b = %.3f +- %.3f, T_cr_C =", f.T_inf, f.a, f.sigma_a, f.b,
                         f.sigma_b);
  for (std::size_t i = 0; i < f.n.size(); ++i) d += format(" %.4f", f.T_cr[i]);
  RunConfig off;
  off.model.wick_diagonal = false;
  const auto alt = run_scaling(off).fit;
  d += format("\n       info: without the diagonal contraction a = %.3f +- %.3f, b = %.3f +- %.3f, T_inf = %.4f",
              alt.a, alt.sigma_a, alt.b, alt.sigma_b, alt.T_inf);
  return {ok, d};
}

Outcome oracle_hierarchy() {
  const auto p = half_filled(10);
  const double tc = cache.tcrit(Scheme::ce, 10);
  const auto res = run_compare(p, {0.2, 0.4, 0.6}, 0.01);
  bool ok = true;
  std::string d;
  for (const auto& r : res.rows) {
    if (r.quantity != "bb" || r.T >= tc) continue;
    const double ec = std::abs(r.ce - r.exact);
    const double others = std::min({std::abs(r.gce - r.exact), std::abs(r.vbp - r.exact), std::abs(r.parity - r.exact)});
    ok = ok && ec < others;
    d += format("T=%.1f: |C-exact| %.3f vs min other %.3f; ", r.T, ec, others);
  }
  return {ok, d.substr(0, d.size() - 2)};
}

Outcome peierls() {
  const auto temps = temperature_grid(0.05, 2.0, 0.05);
  int violations = 0, checked = 0, unconverged = 0;
  double margin = INFINITY;
  for (int omega : {4, 8, 10, 12}) {
    const auto p = half_filled(omega);
    const auto s = sweep_scheme(p, Scheme::ce, temps);
    const auto exact = exact_canonical(p.levels, p.model, temps);
    for (std::size_t i = 0; i < temps.size(); ++i) {
      if (!s.points[i].convergence.converged) {
        ++unconverged;
        continue;
      }
      ++checked;
      const double gap = s.points[i].F - exact[i].F;
      margin = std::min(margin, gap);
      if (gap < -1e-8) ++violations;
    }
  }
  return {violations == 0 && checked > 0,
          format("%d violations over %d converged points (%d unconverged), min F~_C - F = %.3e", violations, checked,
                 unconverged, margin)};
}

Outcome gradient_master() {
  std::mt19937_64 rng(20240607);
  const double h = 1e-5;
  const int sizes[] = {3, 4, 6};
  double worst = 0.0;
  int states = 0;
  std::uniform_real_distribution<double> uv(0.05, 0.95), uf(0.05, 0.45), ug(0.2, 1.2), uT(0.1, 2.5);
  while (states < 200) {
    const int omega = sizes[states % 3];
    const int n = 2 * (1 + static_cast<int>(rng() % omega));
    const auto levels = pairtherm::testing::random_levels(rng, omega);
    const ModelParams model{ug(rng), 0.1, n};
    const auto grid = GaugeGrid::full(n, omega);
    const double T = uT(rng);
    std::vector<double> v(omega), f(omega);
    for (int k = 0; k < omega; ++k) {
      v[k] = uv(rng);
      f[k] = uf(rng);
      if (rng() % 2) f[k] = 1.0 - f[k];
    }
    const auto ev = evaluate(VariationalState::from_occupations(v, f, T), grid, levels, model);
    auto F = [&](const std::vector<double>& vv, const std::vector<double>& ff) {
      return free_energy_tilde(VariationalState::from_occupations(vv, ff, T), grid, levels, model);
    };
    for (int k = 0; k < omega; ++k) {
      auto vp = v, vm = v, fp = f, fm = f;
      vp[k] += h, vm[k] -= h, fp[k] += h, fm[k] -= h;
      const double dv = (F(vp, f) - F(vm, f)) / (2 * h);
      const double df = (F(v, fp) - F(v, fm)) / (2 * h);
      const double scale = std::max({std::abs(dv), std::abs(df), 1.0});
      worst = std::max({worst, std::abs(dv - ev.grad_v[k]) / scale, std::abs(df - 2.0 * ev.residual_f[k]) / scale});
    }
    ++states;
  }
  return {worst < 1e-5, format("%d states, worst relative mismatch %.2e", states, worst)};
}

Outcome projection_identities() {
  double worst_n = 0.0, worst_var = 0.0;
  int points = 0, mu_points = 0;
  for (const auto& r : cache.series26(Scheme::ce).points) {
    if (!r.convergence.converged) continue;
    ++points;
    worst_n = std::max(worst_n, std::abs(r.n_mean - r.n));
    worst_var = std::max(worst_var, std::abs(r.n_var));
  }
  const auto p = half_filled(10);
  const auto grid = GaugeGrid::full(p.model.n, p.levels.omega);
  const double dT = 0.01;
  auto at = [&](double mu, double T) { return minimize_ce_bcs(p.levels, with_mu(p.model, mu), T, grid, tight()); };
  double worst_mu = 0.0;
  for (double T : {0.3, 0.8, 1.5}) {
    const auto base = at(0.0, T);
    const double C0 = (at(0.0, T + dT).E - at(0.0, T - dT).E) / (2 * dT);
    for (double mu : {-0.5, 0.5}) {
      const auto r = at(mu, T);
      const double C = (at(mu, T + dT).E - at(mu, T - dT).E) / (2 * dT);
      worst_mu = std::max({worst_mu, std::abs(r.delta_av - base.delta_av), std::abs(r.qp_number - base.qp_number),
                           std::abs(C - C0)});
      ++mu_points;
    }
  }
  const bool ok = worst_n < 1e-8 && worst_var < 1e-8 && worst_mu < 1e-6;
  return {ok, format("%d converged points: max |<N>-n| = %.2e, max Var(N) = %.2e; %d shifted solves: max change %.2e",
                     points, worst_n, worst_var, mu_points, worst_mu)};
}

Outcome gce_reduction() {
  const auto p = half_filled(26);
  const auto none = GaugeGrid::none(p.model.n, p.levels.omega);
  double worst = 0.0;
  int bad = 0, points = 0;
  for (double T : temperature_grid(0.05, 2.0, 0.05)) {
    const auto gce = solve_gce_bcs(p.levels, p.model, T);
    const auto m =
        minimize_from(paired_seed(p.levels, p.model.n, T), none, p.levels, with_mu(p.model, gce.mu_eff), tight());
    const auto r = report_for(Scheme::gce, m.state, none, p.levels, p.model, m.info, gce.mu_eff);
    ++points;
    if (!m.info.converged) ++bad;
    for (auto [a, b] : {std::pair{r.F, gce.F}, {r.E, gce.E}, {r.S, gce.S}, {r.delta_av, gce.delta_av}, {r.bb, gce.bb},
                        {r.qp_number, gce.qp_number}, {r.n_mean, gce.n_mean}, {r.n_var, gce.n_var}})
      worst = std::max(worst, std::abs(a - b));
    for (std::size_t k = 0; k < r.occupations.size(); ++k)
      worst = std::max(worst, std::abs(r.occupations[k] - gce.occupations[k]));
  }
  return {bad == 0 && worst < 1e-9,
          format("%d temperatures, %d unconverged, max deviation %.2e", points, bad, worst)};
}

Outcome zero_t_limit() {
  const auto p = half_filled(4);
  const auto pbcs = pairtherm::testing::pbcs_minimize(p.levels, p.model);
  const auto r = minimize_ce_bcs(p.levels, p.model, 1e-3, GaugeGrid::full(p.model.n, 4), SolverConfig{});
  const double ground = canonical_spectrum(p.levels, p.model).ground_energy;
  const double de = std::abs(r.E - pbcs.energy), rel = std::abs(r.F - ground) / std::abs(ground);
  return {r.convergence.converged && de < 1e-5 && rel < 0.02,
          format("E_C = %.9f, projected BCS = %.9f (diff %.2e), F~_C vs exact ground %.6f: %.3f%%", r.E, pbcs.energy,
                 de, ground, 100 * rel)};
}

Outcome heat_capacity_structure() {
  const double tc = cache.tcrit(Scheme::ce, 26), tg = cache.tcrit(Scheme::gce, 26);
  const auto& c = cache.series26(Scheme::ce).heat;
  const auto& g = cache.series26(Scheme::gce).heat;
  const double window = 0.02;  // two grid steps
  const bool ce_jump = c.has_jump && std::abs(c.jump_T - tc) <= window;
  const bool ce_s = c.has_s_shape && c.inflection_T < tc;
  const bool g_jump = g.has_jump && std::abs(g.jump_T - tg) <= window;
  return {ce_jump && ce_s && g_jump,
          format("C_C jump %.3f at T=%.3f (T_cr_C %.4f), inflection at T=%.3f; C_G jump %.3f at T=%.3f (T_cr_G %.4f)",
                 c.jump, c.jump_T, tc, c.has_s_shape ? c.inflection_T : NAN, g.jump, g.jump_T, tg)};
}

Outcome qp_ordering() {
  const auto& c = cache.series26(Scheme::ce).points;
  const auto& p = cache.series26(Scheme::parity).points;
  const auto& g = cache.series26(Scheme::gce).points;
  int checked = 0, bad = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].T > 0.3 + 1e-9) break;
    ++checked;
    last = i;
    if (!(c[i].qp_number <= p[i].qp_number + 1e-6 && p[i].qp_number <= g[i].qp_number + 1e-6)) ++bad;
  }
  return {bad == 0 && checked > 0,
          format("%d of %d temperatures in [0.05, 0.3] out of order; at T=%.2f: C %.4f, pi %.4f, G %.4f", bad, checked,
                 c[last].T, c[last].qp_number, p[last].qp_number, g[last].qp_number)};
}

Outcome kernel_oracle() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0), ang(0.0, 2.0 * std::numbers::pi);
  double worst = 0.0;
  int used = 0;
  while (used < 1000) {
    const double v = unit(rng), u = std::sqrt(1.0 - v * v);
    const double f = unit(rng), fb = unit(rng), phi = ang(rng);
    const auto K = pair_kernel(u, v, f, fb, 1.0 - f, 1.0 - fb, phi);
    if (std::abs(K.zeta) < 1e-3) continue;
    ++used;
    const auto P = pair_space_trace(u, v, f, fb, phi, PairBasis::particle);
    auto err = [](cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
    worst = std::max({worst, err(K.zeta, P.norm), err(K.rho, P.rho), err(K.rho_bar, P.rho_bar),
                      err(K.kappa, P.kappa), err(K.kappa_bar, P.kappa_bar)});
  }
  double doubling = 0.0;
  const auto levels = pairtherm::testing::random_levels(rng, 8);
  const ModelParams model{0.5, 0.1, 8};
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = pairtherm::testing::random_state(rng, 8, 0.5);
    const auto a = evaluate(s, GaugeGrid::full(8, 8), levels, model);
    const auto b = evaluate(s, GaugeGrid::full(8, 8, 2 * GaugeGrid::default_nodes(8)), levels, model);
    for (auto [x, y] : {std::pair{a.E, b.E}, {a.S, b.S}, {a.bb, b.bb}, {a.n_mean, b.n_mean}})
      doubling = std::max(doubling, std::abs(x - y));
    for (int k = 0; k < 8; ++k)
      doubling = std::max({doubling, std::abs(a.fc[k] - b.fc[k]), std::abs(a.occupation[k] - b.occupation[k])});
  }
  return {worst < 1e-12 && doubling < 1e-12,
          format("1000 kernels, worst mismatch %.2e; grid doubling changes brackets by %.2e", worst, doubling)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "GCE calibration round-trip", gce_calibration},
      {2, "GCE critical temperature", gce_tcrit},
      {3, "GCE bulk convergence", gce_bulk},
      {4, "CE shift of the critical temperature", ce_shift},
      {5, "critical temperature scaling fit", scaling_fit},
      {6, "pair-correlation accuracy against the exact ensemble", oracle_hierarchy},
      {7, "Peierls bound", peierls},
      {8, "analytic gradient against finite differences", gradient_master},
      {9, "projection identities and chemical-potential invariance", projection_identities},
      {10, "single-node grid reproduces GCE", gce_reduction},
      {11, "zero-temperature limit", zero_t_limit},
      {12, "heat-capacity structure", heat_capacity_structure},
      {13, "quasiparticle-number ordering", qp_ordering},
      {14, "pair kernel against explicit traces", kernel_oracle},
  };
  const std::set<int> wanted(only.begin(), only.end());
  int passed = 0, ran = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    passed += o.pass ? 1 : 0;
    std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
