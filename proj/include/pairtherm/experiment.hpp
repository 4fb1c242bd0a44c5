#pragma once

// Batch drivers behind the command-line tool: temperature sweeps with
// bidirectional continuation, critical-temperature bisection, the
// finite-size scaling fit, comparison against the exact canonical oracle, and
// the CSV / JSON writers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "pairtherm/config.hpp"
#include "pairtherm/exact_oracle.hpp"
#include "pairtherm/gce.hpp"
#include "pairtherm/pairing_model.hpp"
#include "pairtherm/thermal_report.hpp"
#include "pairtherm/thermal_solvers.hpp"

namespace pairtherm {

inline constexpr const char* kVersion = "1.0.0";

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- problem setup ------------------------------------------------------------

struct Problem {
  LevelScheme levels;
  ModelParams model;
  int nodes = 0;
  SolverConfig solver;
};

/// Uniform levels and coupling from the config; with `half_filled` the level
/// count and particle number are both set to `n` (used by the scaling run).
inline Problem make_problem(const RunConfig& c, std::optional<int> half_filled = std::nullopt) {
  Problem p;
  const int omega = half_filled.value_or(c.model.omega);
  const int n = half_filled.value_or(c.model.n);
  p.levels = build_uniform_levels(omega, c.model.lambda_cut);
  p.model.n = n;
  p.model.mu = c.model.mu;
  p.model.wick_diagonal = c.model.wick_diagonal;
  p.model.g = c.model.g ? *c.model.g
                        : calibrate_g(p.levels, n, c.model.target_gap, MuMode::number, c.model.wick_diagonal,
                                      c.model.mu);
  validate(p.levels, p.model);
  p.nodes = half_filled ? 0 : c.grid_nodes;
  p.solver = c.solver;
  return p;
}

inline std::vector<double> temperature_grid(double T_min, double T_max, double dT) {
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((T_max - T_min) / dT + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(T_min + static_cast<double>(i) * dT);
  return out;
}

/// `b` replaces `a` when it converged and `a` did not, or when it has a lower
/// F beyond roundoff with equal convergence status.
inline bool better_report(const ThermalReport& a, const ThermalReport& b) {
  if (b.convergence.converged != a.convergence.converged) return b.convergence.converged;
  return b.F < a.F - 1e-10 * (1.0 + std::abs(a.F));
}

/// One point of one scheme. `warm` continues from a neighbouring report; with
/// no warm start the projected schemes try the GCE state and a paired seed.
inline ThermalReport solve_point(const Problem& p, Scheme scheme, double T,
                                 const ThermalReport* warm = nullptr) {
  switch (scheme) {
    case Scheme::gce: return solve_gce_bcs(p.levels, p.model, T);
    case Scheme::vbp:
      return vbp_evaluate(p.levels, p.model, T, GaugeGrid::full(p.model.n, p.levels.omega, p.nodes),
                          solve_gce_bcs(p.levels, p.model, T));
    case Scheme::ce: {
      const auto grid = GaugeGrid::full(p.model.n, p.levels.omega, p.nodes);
      if (warm) return minimize_ce_bcs(p.levels, p.model, T, grid, p.solver, warm->state);
      return minimize_ce_bcs(p.levels, p.model, T, grid, p.solver);
    }
    case Scheme::parity:
      if (warm) return solve_parity_bcs(p.levels, p.model, T, p.solver, warm->state, warm->mu_eff);
      return solve_parity_bcs(p.levels, p.model, T, p.solver);
  }
  throw InvalidArgument("unknown scheme");
}

/// Best of a cold start and warm starts from the given neighbours.
inline ThermalReport solve_point_multi(const Problem& p, Scheme scheme, double T,
                                       std::initializer_list<const ThermalReport*> warms) {
  ThermalReport best = solve_point(p, scheme, T);
  if (scheme == Scheme::gce || scheme == Scheme::vbp) return best;
  for (const auto* w : warms) {
    if (!w) continue;
    auto r = solve_point(p, scheme, T, w);
    if (better_report(best, r)) best = std::move(r);
  }
  return best;
}

// ---- sweep ----------------------------------------------------------------------

struct SweepSeries {
  Scheme scheme = Scheme::gce;
  std::vector<ThermalReport> points;
  HeatCapacity heat;
};

/// Up- and down-sweep with warm starts, keeping the better branch per point,
/// then C = dE/dT from the converged points.
inline SweepSeries sweep_scheme(const Problem& p, Scheme scheme, const std::vector<double>& temps) {
  SweepSeries s;
  s.scheme = scheme;
  const std::size_t m = temps.size();
  std::vector<ThermalReport> up, down(m);
  up.reserve(m);
  for (std::size_t i = 0; i < m; ++i) up.push_back(solve_point(p, scheme, temps[i], i ? &up[i - 1] : nullptr));
  if (scheme == Scheme::ce || scheme == Scheme::parity) {
    for (std::size_t j = m; j-- > 0;) down[j] = solve_point(p, scheme, temps[j], j + 1 < m ? &down[j + 1] : nullptr);
    for (std::size_t i = 0; i < m; ++i)
      if (better_report(up[i], down[i])) up[i] = std::move(down[i]);
  }
  s.points = std::move(up);
  std::vector<double> E(m);
  auto conv = std::make_unique<bool[]>(m);
  for (std::size_t i = 0; i < m; ++i) {
    E[i] = s.points[i].E;
    conv[i] = s.points[i].convergence.converged;
  }
  s.heat = heat_capacity(temps, E, std::span<const bool>(conv.get(), m));
  for (std::size_t i = 0; i < m; ++i) s.points[i].heat_capacity = s.heat.C[i];
  return s;
}

inline std::vector<SweepSeries> run_sweep(const Problem& p, const std::vector<Scheme>& schemes,
                                          const std::vector<double>& temps, int threads = 1) {
  std::vector<SweepSeries> out(schemes.size());
  parallel_for(schemes.size(), threads, [&](std::size_t i) { out[i] = sweep_scheme(p, schemes[i], temps); });
  return out;
}

// ---- critical temperature ---------------------------------------------------------

class TransitionNotFound : public Error {
 public:
  using Error::Error;
};

struct TcritResult {
  Scheme scheme = Scheme::gce;
  int n = 0;
  double T_cr = 0.0;
  double lo = 0.0;  // last paired temperature
  double hi = 0.0;  // first normal temperature
  double resolution = 0.0;
  int solves = 0;
  bool all_converged = true;
  std::vector<std::pair<double, double>> scan;  // (T, order parameter)
};

/// Coarse up-scan to bracket the first normal point, then bisection down to
/// `resolution`. Each evaluation keeps the better of a cold start and warm
/// starts from both bracket ends, so a metastable branch cannot fake the
/// crossing.
inline TcritResult find_tcrit(const Problem& p, Scheme scheme, const TcritConfig& tc) {
  TcritResult r;
  r.scheme = scheme;
  r.n = p.model.n;
  r.resolution = tc.resolution;
  auto note = [&](const ThermalReport& rep) {
    ++r.solves;
    r.all_converged = r.all_converged && rep.convergence.converged;
  };

  std::optional<ThermalReport> paired, normal;
  const auto grid = temperature_grid(tc.T_lo, tc.T_hi, tc.scan_step);
  std::vector<double> temps = grid;
  if (temps.back() < tc.T_hi - 1e-12) temps.push_back(tc.T_hi);
  for (double T : temps) {
    auto rep = solve_point_multi(p, scheme, T, {paired ? &*paired : nullptr});
    note(rep);
    r.scan.emplace_back(T, order_parameter(rep));
    if (is_normal(rep)) {
      normal = std::move(rep);
      break;
    }
    paired = std::move(rep);
  }
  char buf[160];
  if (!paired) {
    std::snprintf(buf, sizeof buf, "tcrit: no pairing at T_lo = %.6g (order parameter %.3g)", tc.T_lo,
                  r.scan.front().second);
    throw TransitionNotFound(buf);
  }
  if (!normal) {
    std::snprintf(buf, sizeof buf, "tcrit: still paired at T_hi = %.6g (order parameter %.3g); T_lo = %.6g", tc.T_hi,
                  r.scan.back().second, tc.T_lo);
    throw TransitionNotFound(buf);
  }
  while (normal->T - paired->T > tc.resolution) {
    const double mid = 0.5 * (paired->T + normal->T);
    auto rep = solve_point_multi(p, scheme, mid, {&*paired, &*normal});
    note(rep);
    if (is_normal(rep)) normal = std::move(rep);
    else paired = std::move(rep);
  }
  r.lo = paired->T;
  r.hi = normal->T;
  r.T_cr = 0.5 * (r.lo + r.hi);
  return r;
}

// ---- scaling fit --------------------------------------------------------------------

struct ScalingFit {
  std::vector<int> n;
  std::vector<double> T_cr;
  double T_inf = 0.0;
  double a = 0.0, b = 0.0;
  double sigma_a = 0.0, sigma_b = 0.0;
  std::vector<double> residuals;  // fit - data
  bool degenerate = false;
  std::string note;
};

namespace detail {

struct PowerLawFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& x;
  const std::vector<double>& y;  // T_cr - T_inf
  PowerLawFunctor(const std::vector<double>& xs, const std::vector<double>& ys)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(xs.size())), x(xs), y(ys) {}
  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < x.size(); ++i) r[static_cast<Eigen::Index>(i)] = p[0] * std::pow(x[i], -p[1]) - y[i];
    return 0;
  }
  int df(const InputType& p, JacobianType& J) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = std::pow(x[i], -p[1]);
      J(static_cast<Eigen::Index>(i), 0) = v;
      J(static_cast<Eigen::Index>(i), 1) = -p[0] * v * std::log(x[i]);
    }
    return 0;
  }
};

}  // namespace detail

/// Least squares T_cr(n) = T_inf + a n^{-b} with T_inf held fixed.
/// Uncertainties come from s^2 (J^T J)^{-1} with s^2 = RSS / (m - 2).
inline ScalingFit fit_scaling(const std::vector<int>& n, const std::vector<double>& T_cr, double T_inf) {
  if (n.size() != T_cr.size()) throw InvalidArgument("fit_scaling: size mismatch");
  if (n.size() < 4) throw InvalidArgument("fit_scaling: need at least 4 points");
  ScalingFit f;
  f.n = n;
  f.T_cr = T_cr;
  f.T_inf = T_inf;
  const std::size_t m = n.size();
  std::vector<double> x(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = n[i];
    y[i] = T_cr[i] - T_inf;
  }

  // Start from the log-log line through the positive points.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++k;
  }
  Eigen::VectorXd p(2);
  p << 1.0, 0.75;
  if (k >= 2 && k * sxx - sx * sx > 0.0) {
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    p << std::exp((sy - slope * sx) / k), -slope;
  }
  if (k < static_cast<int>(m)) {
    f.degenerate = true;
    f.note = "some T_cr lie at or below T_inf";
  }

  detail::PowerLawFunctor fn(x, y);
  Eigen::LevenbergMarquardt<detail::PowerLawFunctor> lm(fn);
  lm.setXtol(1e-15);
  lm.setFtol(1e-15);
  lm.setMaxfev(2000);
  const auto status = lm.minimize(p);
  f.a = p[0];
  f.b = p[1];

  Eigen::VectorXd r(m);
  fn(p, r);
  Eigen::MatrixXd J(m, 2);
  fn.df(p, J);
  f.residuals.assign(r.data(), r.data() + m);
  const double rss = r.squaredNorm();
  const Eigen::Matrix2d JtJ = J.transpose() * J;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(JtJ);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    f.degenerate = true;
    f.note += (f.note.empty() ? "" : "; ") + std::string("singular normal matrix");
  } else {
    const Eigen::Matrix2d cov = lu.inverse() * (rss / static_cast<double>(m - 2));
    f.sigma_a = std::sqrt(std::max(0.0, cov(0, 0)));
    f.sigma_b = std::sqrt(std::max(0.0, cov(1, 1)));
  }
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    f.degenerate = true;
    f.note += (f.note.empty() ? "" : "; ") + std::string("improper fit input");
  }
  if (!(f.b > 0.0) || !std::isfinite(f.a) || !std::isfinite(f.b)) {
    f.degenerate = true;
    f.note += (f.note.empty() ? "" : "; ") + std::string("non-positive or non-finite exponent");
  }
  return f;
}

struct ScalingRun {
  std::vector<TcritResult> scheme_points;  // configured scheme, one per n
  std::vector<TcritResult> gce_points;     // GCE, one per n
  ScalingFit fit;
};

/// T_cr of the configured scheme for every half-filled n, T_inf from GCE at
/// the largest n, then the power-law fit.
inline ScalingRun run_scaling(const RunConfig& c, int threads = 1) {
  const auto& ns = c.scaling.n_list;
  if (ns.size() < 4) throw InvalidArgument("scaling: need at least 4 values in n_list");
  ScalingRun run;
  run.scheme_points.resize(ns.size());
  run.gce_points.resize(ns.size());
  parallel_for(2 * ns.size(), threads, [&](std::size_t j) {
    const std::size_t i = j / 2;
    const auto p = make_problem(c, ns[i]);
    if (j % 2 == 0) run.scheme_points[i] = find_tcrit(p, c.scaling.scheme, c.tcrit);
    else run.gce_points[i] = find_tcrit(p, Scheme::gce, c.tcrit);
  });
  const auto largest = std::max_element(ns.begin(), ns.end()) - ns.begin();
  std::vector<double> t;
  for (const auto& r : run.scheme_points) t.push_back(r.T_cr);
  run.fit = fit_scaling(ns, t, run.gce_points[static_cast<std::size_t>(largest)].T_cr);
  return run;
}

// ---- comparison with the exact oracle ------------------------------------------------

struct CompareRow {
  double T = 0.0;
  std::string quantity;
  double exact = 0.0;
  double ce = 0.0, vbp = 0.0, parity = 0.0, gce = 0.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<ThermalReport> reports;  // ce, vbp, parity, gce at each T (in that order)
  std::vector<double> peierls;         // F~_C - F_exact per T
  bool ce_closest_bb = true;           // over T with the CE state paired
  std::vector<double> ce_not_closest;  // temperatures violating it
};

inline constexpr Scheme kCompareOrder[] = {Scheme::ce, Scheme::vbp, Scheme::parity, Scheme::gce};

inline CompareResult run_compare(const Problem& p, const std::vector<double>& temps, double dT, int threads = 1) {
  const std::size_t m = temps.size();
  std::vector<std::vector<ThermalReport>> at(m, std::vector<ThermalReport>(4));
  std::vector<std::vector<double>> C(m, std::vector<double>(4));
  std::vector<CanonicalPoint> exact(m);
  parallel_for(m, threads, [&](std::size_t i) {
    const double T = temps[i];
    if (!(T - dT > 0.0)) throw InvalidArgument("compare: T - dT must be > 0");
    exact[i] = exact_canonical(p.levels, p.model, T);
    for (int s = 0; s < 4; ++s) {
      at[i][s] = solve_point(p, kCompareOrder[s], T);
      const auto lo = solve_point_multi(p, kCompareOrder[s], T - dT, {&at[i][s]});
      const auto hi = solve_point_multi(p, kCompareOrder[s], T + dT, {&at[i][s]});
      C[i][s] = (hi.E - lo.E) / (2.0 * dT);
    }
  });
  CompareResult out;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& r = at[i];
    auto row = [&](const char* q, double ex, auto get) {
      out.rows.push_back({temps[i], q, ex, get(0), get(1), get(2), get(3)});
    };
    row("bb", exact[i].bb, [&](int s) { return r[s].bb; });
    row("E", exact[i].E, [&](int s) { return r[s].E; });
    row("S", exact[i].S, [&](int s) { return r[s].S; });
    row("C", exact[i].C, [&](int s) { return C[i][s]; });
    row("F", exact[i].F, [&](int s) { return r[s].F; });
    out.peierls.push_back(r[0].F - exact[i].F);
    if (!is_normal(r[0])) {
      const double dc = std::abs(r[0].bb - exact[i].bb);
      bool closest = true;
      for (int s = 1; s < 4; ++s) closest = closest && dc < std::abs(r[s].bb - exact[i].bb);
      if (!closest) {
        out.ce_closest_bb = false;
        out.ce_not_closest.push_back(temps[i]);
      }
    }
    for (auto& rep : at[i]) out.reports.push_back(std::move(rep));
  }
  return out;
}

/// Exact canonical thermodynamics on a temperature grid.
inline std::vector<CanonicalPoint> run_oracle(const Problem& p, const std::vector<double>& temps) {
  return exact_canonical(p.levels, p.model, temps);
}

// ---- writers --------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);  // no "-0"
  return buf;
}

}  // namespace detail

inline constexpr const char* kSweepHeader =
    "scheme,n,T,F,E,S,delta_av,delta_tilde_min,delta_tilde_max,qp_number,bb,C,converged,grad_residual";

inline void write_report_row(std::ostream& o, const ThermalReport& r) {
  using detail::fmt;
  o << to_string(r.scheme) << ',' << r.n << ',' << fmt(r.T) << ',' << fmt(r.F) << ',' << fmt(r.E) << ',' << fmt(r.S)
    << ',' << fmt(r.delta_av) << ',' << fmt(r.delta_tilde_min) << ',' << fmt(r.delta_tilde_max) << ','
    << fmt(r.qp_number) << ',' << fmt(r.bb) << ',' << fmt(r.heat_capacity) << ',' << (r.convergence.converged ? 1 : 0)
    << ',' << fmt(r.convergence.grad_residual) << '\n';
}

inline void write_sweep_csv(std::ostream& o, const std::vector<SweepSeries>& series) {
  o << kSweepHeader << '\n';
  for (const auto& s : series)
    for (const auto& r : s.points) write_report_row(o, r);
}

inline void write_reports_csv(std::ostream& o, const std::vector<ThermalReport>& reports) {
  o << kSweepHeader << '\n';
  for (const auto& r : reports) write_report_row(o, r);
}

inline void write_tcrit_csv(std::ostream& o, const std::vector<TcritResult>& rs) {
  o << "scheme,n,T_cr,T_lo,T_hi,resolution,solves,all_converged\n";
  for (const auto& r : rs)
    o << to_string(r.scheme) << ',' << r.n << ',' << detail::fmt(r.T_cr) << ',' << detail::fmt(r.lo) << ','
      << detail::fmt(r.hi) << ',' << detail::fmt(r.resolution) << ',' << r.solves << ',' << (r.all_converged ? 1 : 0)
      << '\n';
}

inline void write_scaling_csv(std::ostream& o, const ScalingRun& run) {
  using detail::fmt;
  o << "n,T_cr,T_cr_gce,fit,residual\n";
  for (std::size_t i = 0; i < run.fit.n.size(); ++i)
    o << run.fit.n[i] << ',' << fmt(run.fit.T_cr[i]) << ',' << fmt(run.gce_points[i].T_cr) << ','
      << fmt(run.fit.T_cr[i] + run.fit.residuals[i]) << ',' << fmt(run.fit.residuals[i]) << '\n';
}

inline void write_compare_csv(std::ostream& o, const CompareResult& c) {
  using detail::fmt;
  o << "T,quantity,exact,ce,vbp,parity,gce,err_ce,err_vbp,err_parity,err_gce\n";
  for (const auto& r : c.rows)
    o << fmt(r.T) << ',' << r.quantity << ',' << fmt(r.exact) << ',' << fmt(r.ce) << ',' << fmt(r.vbp) << ','
      << fmt(r.parity) << ',' << fmt(r.gce) << ',' << fmt(std::abs(r.ce - r.exact)) << ','
      << fmt(std::abs(r.vbp - r.exact)) << ',' << fmt(std::abs(r.parity - r.exact)) << ','
      << fmt(std::abs(r.gce - r.exact)) << '\n';
}

inline void write_oracle_csv(std::ostream& o, int n, const std::vector<CanonicalPoint>& pts) {
  using detail::fmt;
  o << "n,T,F,E,S,C,bb\n";
  for (const auto& p : pts)
    o << n << ',' << fmt(p.T) << ',' << fmt(p.F) << ',' << fmt(p.E) << ',' << fmt(p.S) << ',' << fmt(p.C) << ','
      << fmt(p.bb) << '\n';
}

// ---- metadata ---------------------------------------------------------------------------

inline nlohmann::ordered_json versions_json() {
  nlohmann::ordered_json v;
  v["pairtherm"] = kVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = BOOST_LIB_VERSION;
#if defined(__VERSION__)
  v["compiler"] = __VERSION__;
#endif
  return v;
}

inline nlohmann::ordered_json convergence_json(const std::vector<ThermalReport>& reports) {
  nlohmann::ordered_json c;
  int conv = 0;
  double worst = 0.0;
  nlohmann::ordered_json bad = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    if (r.convergence.converged) ++conv;
    else bad.push_back({{"scheme", to_string(r.scheme)}, {"n", r.n}, {"T", r.T}, {"note", r.convergence.note}});
    if (std::isfinite(r.convergence.grad_residual)) worst = std::max(worst, r.convergence.grad_residual);
  }
  c["points"] = reports.size();
  c["converged"] = conv;
  c["unconverged"] = bad;
  c["max_grad_residual"] = worst;
  return c;
}

inline nlohmann::ordered_json metadata_json(const RunConfig& cfg, const std::string& command, const Problem& p,
                                            unsigned long long seed) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = seed;
  j["versions"] = versions_json();
  j["model"] = {{"omega", p.levels.omega}, {"n", p.model.n}, {"lambda_cut", p.levels.lambda_cut},
                {"g", p.model.g},          {"mu", p.model.mu}, {"wick_diagonal", p.model.wick_diagonal}};
  j["nodes"] = p.nodes > 0 ? p.nodes : GaugeGrid::default_nodes(p.levels.omega);
  return j;
}

}  // namespace pairtherm
