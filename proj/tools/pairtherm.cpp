// Command-line driver: pairtherm <verb> --config run.ini [--out-dir DIR]
// Exit codes: 0 success, 2 finished with unconverged points, 1 error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pairtherm/config.hpp"
#include "pairtherm/experiment.hpp"

namespace fs = std::filesystem;
using namespace pairtherm;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  unsigned long long seed = 0;
};

struct Output {
  const RunConfig& cfg;
  fs::path dir;

  void csv(const std::string& name, const std::function<void(std::ostream&)>& body) const {
    if (!cfg.wants("csv")) return;
    std::ofstream o(dir / name, std::ios::binary);
    if (!o) throw Error("cannot write " + (dir / name).string());
    body(o);
  }

  void sidecar(const std::string& name, const json& j) const {
    if (!cfg.wants("json")) return;
    std::ofstream o(dir / name, std::ios::binary);
    if (!o) throw Error("cannot write " + (dir / name).string());
    o << j.dump(2) << '\n';
  }
};

json heat_json(const HeatCapacity& h) {
  json j;
  j["has_jump"] = h.has_jump;
  j["jump_T"] = h.has_jump ? json(h.jump_T) : json(nullptr);
  j["jump"] = h.jump;
  j["significance"] = h.significance;
  j["has_s_shape"] = h.has_s_shape;
  j["inflection_T"] = h.has_s_shape ? json(h.inflection_T) : json(nullptr);
  j["excluded_points"] = h.gaps.size();
  return j;
}

json tcrit_json(const TcritResult& r) {
  return {{"scheme", to_string(r.scheme)}, {"n", r.n},           {"T_cr", r.T_cr},
          {"T_lo", r.lo},                  {"T_hi", r.hi},       {"resolution", r.resolution},
          {"solves", r.solves},            {"all_converged", r.all_converged}};
}

bool all_converged(const std::vector<ThermalReport>& rs) {
  for (const auto& r : rs)
    if (!r.convergence.converged) return false;
  return true;
}

int cmd_solve(const RunConfig& cfg, const Common& c, const Output& out) {
  const auto p = make_problem(cfg);
  std::vector<ThermalReport> rs(cfg.sweep.schemes.size());
  parallel_for(rs.size(), c.threads, [&](std::size_t i) { rs[i] = solve_point(p, cfg.sweep.schemes[i], cfg.solve_T); });
  out.csv("solve.csv", [&](std::ostream& o) { write_reports_csv(o, rs); });
  auto j = metadata_json(cfg, "solve", p, c.seed);
  j["convergence"] = convergence_json(rs);
  out.sidecar("solve.json", j);
  for (const auto& r : rs)
    std::printf("%-6s T=%.6g F=%.10g delta_av=%.6g qp_number=%.6g converged=%d\n", to_string(r.scheme), r.T, r.F,
                r.delta_av, r.qp_number, r.convergence.converged ? 1 : 0);
  return all_converged(rs) ? 0 : 2;
}

int cmd_sweep(const RunConfig& cfg, const Common& c, const Output& out) {
  const auto p = make_problem(cfg);
  const auto temps = temperature_grid(cfg.sweep.T_min, cfg.sweep.T_max, cfg.sweep.dT);
  const auto series = run_sweep(p, cfg.sweep.schemes, temps, c.threads);
  out.csv("sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, series); });
  std::vector<ThermalReport> all;
  json heat;
  for (const auto& s : series) {
    all.insert(all.end(), s.points.begin(), s.points.end());
    heat[to_string(s.scheme)] = heat_json(s.heat);
  }
  auto j = metadata_json(cfg, "sweep", p, c.seed);
  j["temperatures"] = {{"T_min", cfg.sweep.T_min}, {"T_max", cfg.sweep.T_max}, {"dT", cfg.sweep.dT},
                       {"count", temps.size()}};
  j["heat_capacity"] = heat;
  j["convergence"] = convergence_json(all);
  out.sidecar("sweep.json", j);
  for (const auto& s : series) {
    std::size_t bad = 0;
    for (const auto& r : s.points) bad += r.convergence.converged ? 0 : 1;
    std::printf("%-6s %zu points, %zu unconverged", to_string(s.scheme), s.points.size(), bad);
    if (s.heat.has_jump) std::printf(", C jump at T=%.4g", s.heat.jump_T);
    std::printf("\n");
  }
  return all_converged(all) ? 0 : 2;
}

int cmd_tcrit(const RunConfig& cfg, const Common& c, const Output& out, const std::vector<std::string>& names) {
  const auto p = make_problem(cfg);
  std::vector<Scheme> schemes;
  for (const auto& n : names) schemes.push_back(scheme_from_string(n));
  std::vector<TcritResult> rs(schemes.size());
  parallel_for(rs.size(), c.threads, [&](std::size_t i) { rs[i] = find_tcrit(p, schemes[i], cfg.tcrit); });
  out.csv("tcrit.csv", [&](std::ostream& o) { write_tcrit_csv(o, rs); });
  auto j = metadata_json(cfg, "tcrit", p, c.seed);
  j["results"] = json::array();
  bool ok = true;
  for (const auto& r : rs) {
    j["results"].push_back(tcrit_json(r));
    ok = ok && r.all_converged;
    std::printf("%-6s n=%d T_cr=%.4f in [%.6g, %.6g]\n", to_string(r.scheme), r.n, r.T_cr, r.lo, r.hi);
  }
  out.sidecar("tcrit.json", j);
  return ok ? 0 : 2;
}

int cmd_scaling(const RunConfig& cfg, const Common& c, const Output& out) {
  const auto run = run_scaling(cfg, c.threads);
  out.csv("scaling.csv", [&](std::ostream& o) { write_scaling_csv(o, run); });
  auto j = metadata_json(cfg, "scaling", make_problem(cfg, cfg.scaling.n_list.front()), c.seed);
  j.erase("model");
  j["scheme"] = to_string(cfg.scaling.scheme);
  const auto& f = run.fit;
  j["fit"] = {{"T_inf", f.T_inf}, {"a", f.a},       {"sigma_a", f.sigma_a},   {"b", f.b},
              {"sigma_b", f.sigma_b}, {"degenerate", f.degenerate}, {"note", f.note}};
  j["points"] = json::array();
  j["gce_points"] = json::array();
  bool ok = true;
  for (const auto& r : run.scheme_points) {
    j["points"].push_back(tcrit_json(r));
    ok = ok && r.all_converged;
  }
  for (const auto& r : run.gce_points) j["gce_points"].push_back(tcrit_json(r));
  out.sidecar("scaling.json", j);
  std::printf("T_cr = %.4f + %.4g n^-%.4g  (sigma_a=%.2g sigma_b=%.2g)%s\n", f.T_inf, f.a, f.b, f.sigma_a, f.sigma_b,
              f.degenerate ? "  [degenerate]" : "");
  return ok ? 0 : 2;
}

int cmd_compare(const RunConfig& cfg, const Common& c, const Output& out) {
  const auto p = make_problem(cfg);
  const auto res = run_compare(p, cfg.compare.temperatures, cfg.compare.dT, c.threads);
  out.csv("compare.csv", [&](std::ostream& o) { write_compare_csv(o, res); });
  auto j = metadata_json(cfg, "compare", p, c.seed);
  j["peierls"] = json::array();
  for (std::size_t i = 0; i < res.peierls.size(); ++i)
    j["peierls"].push_back({{"T", cfg.compare.temperatures[i]}, {"F_ce_minus_exact", res.peierls[i]}});
  j["ce_closest_bb"] = res.ce_closest_bb;
  j["ce_not_closest_T"] = res.ce_not_closest;
  j["convergence"] = convergence_json(res.reports);
  out.sidecar("compare.json", j);
  if (!res.ce_closest_bb) {
    std::fprintf(stderr, "warning: CE is not closest to exact <B^dag B> at %zu paired temperature(s)\n",
                 res.ce_not_closest.size());
  }
  std::printf("compared %zu temperatures against the exact canonical ensemble\n", cfg.compare.temperatures.size());
  return all_converged(res.reports) ? 0 : 2;
}

int cmd_oracle(const RunConfig& cfg, const Common& c, const Output& out) {
  const auto p = make_problem(cfg);
  const auto temps = temperature_grid(cfg.sweep.T_min, cfg.sweep.T_max, cfg.sweep.dT);
  const auto pts = run_oracle(p, temps);
  out.csv("oracle.csv", [&](std::ostream& o) { write_oracle_csv(o, p.model.n, pts); });
  out.sidecar("oracle.json", metadata_json(cfg, "oracle", p, c.seed));
  std::printf("exact canonical ensemble at %zu temperatures\n", pts.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal pairing in finite systems: GCE, parity-projected, canonical (projected) BCS"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> tcrit_schemes{"ce"};

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "INI run configuration (defaults if omitted)");
    sub->add_option("--out-dir", c.out_dir, "output directory (overrides outputs.directory)");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "seed for randomized state generation");
  };
  auto* solve = app.add_subcommand("solve", "all configured schemes at solve.T");
  auto* sweep = app.add_subcommand("sweep", "temperature sweep of the configured schemes");
  auto* tcrit = app.add_subcommand("tcrit", "critical temperature by bisection");
  auto* scaling = app.add_subcommand("scaling", "T_cr over scaling.n_list and power-law fit");
  auto* compare = app.add_subcommand("compare", "schemes against the exact canonical ensemble");
  auto* oracle = app.add_subcommand("oracle", "exact canonical thermodynamics on the sweep grid");
  for (auto* s : {solve, sweep, tcrit, scaling, compare, oracle}) add_common(s);
  tcrit->add_option("--scheme", tcrit_schemes, "scheme(s): gce, parity, ce, vbp");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (!c.out_dir.empty()) cfg.outputs.directory = c.out_dir;
    const fs::path dir(cfg.outputs.directory);
    fs::create_directories(dir);
    const Output out{cfg, dir};
    if (*solve) return cmd_solve(cfg, c, out);
    if (*sweep) return cmd_sweep(cfg, c, out);
    if (*tcrit) return cmd_tcrit(cfg, c, out, tcrit_schemes);
    if (*scaling) return cmd_scaling(cfg, c, out);
    if (*compare) return cmd_compare(cfg, c, out);
    if (*oracle) return cmd_oracle(cfg, c, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
