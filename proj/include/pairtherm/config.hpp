#pragma once

// Run configuration: INI text with sections, every key checked against a
// fixed schema. Unknown sections or keys are errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pairtherm/error.hpp"
#include "pairtherm/thermal_report.hpp"
#include "pairtherm/thermal_solvers.hpp"

namespace pairtherm {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ModelConfig {
  int omega = 26;
  double lambda_cut = 10.0;
  int n = 26;
  double mu = 0.0;
  double target_gap = 1.0;
  std::optional<double> g;  // overrides calibration when set
  bool wick_diagonal = true;
};

struct SweepConfig {
  double T_min = 0.05;
  double T_max = 2.0;
  double dT = 0.01;
  std::vector<Scheme> schemes{Scheme::gce, Scheme::parity, Scheme::ce, Scheme::vbp};
};

struct TcritConfig {
  double T_lo = 0.05;
  double T_hi = 4.0;
  double scan_step = 0.05;
  double resolution = 1e-3;
};

struct ScalingConfig {
  std::vector<int> n_list{10, 16, 26, 40, 56};
  Scheme scheme = Scheme::ce;
};

struct CompareConfig {
  std::vector<double> temperatures{0.2, 0.4, 0.6, 0.8, 1.0};
  double dT = 0.01;  // step of the central difference for C
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct RunConfig {
  ModelConfig model;
  int grid_nodes = 0;  // 0: default node count for the level count
  SolverConfig solver;
  SweepConfig sweep;
  TcritConfig tcrit;
  ScalingConfig scaling;
  CompareConfig compare;
  double solve_T = 0.5;
  OutputConfig outputs;

  bool wants(const std::string& format) const {
    return std::find(outputs.formats.begin(), outputs.formats.end(), format) != outputs.formats.end();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw ConfigError("config: '" + key + "' expects an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + text + "'");
}

inline Scheme parse_scheme(const std::string& key, const std::string& text) {
  try {
    return scheme_from_string(trim(text));
  } catch (const InvalidArgument&) {
    throw ConfigError("config: '" + key + "' has unknown scheme '" + text + "'");
  }
}

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"model", {"omega", "lambda_cut", "n", "mu", "target_gap", "g", "wick_diagonal"}},
      {"grid", {"nodes"}},
      {"solver",
       {"max_iter", "tol_state", "tol_grad", "mixing", "descent_step", "fd_step", "anderson_depth",
        "number_tolerance", "max_mu_iter"}},
      {"sweep", {"T_min", "T_max", "dT", "schemes"}},
      {"tcrit", {"T_lo", "T_hi", "scan_step", "resolution"}},
      {"scaling", {"n_list", "scheme"}},
      {"compare", {"temperatures", "dT"}},
      {"solve", {"T"}},
      {"outputs", {"directory", "formats"}},
  };
  return schema;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  const auto& m = c.model;
  if (m.omega < 2) throw ConfigError("config: model.omega must be >= 2");
  if (!(m.lambda_cut > 0.0)) throw ConfigError("config: model.lambda_cut must be > 0");
  if (m.n <= 0 || m.n % 2 != 0 || m.n > 2 * m.omega)
    throw ConfigError("config: model.n must be even, positive and <= 2*omega");
  if (!(m.target_gap > 0.0)) throw ConfigError("config: model.target_gap must be > 0");
  if (m.g && *m.g < 0.0) throw ConfigError("config: model.g must be >= 0");
  if (c.grid_nodes != 0 && c.grid_nodes < 2 * m.omega + 5)
    throw ConfigError("config: grid.nodes must be 0 or >= 2*omega + 5");
  try {
    c.solver.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& s = c.sweep;
  if (!(s.T_min > 0.0) || !(s.T_max >= s.T_min) || !(s.dT > 0.0))
    throw ConfigError("config: sweep needs 0 < T_min <= T_max and dT > 0");
  if (s.schemes.empty()) throw ConfigError("config: sweep.schemes is empty");
  const auto& t = c.tcrit;
  if (!(t.T_lo > 0.0) || !(t.T_hi > t.T_lo) || !(t.scan_step > 0.0) || !(t.resolution > 0.0))
    throw ConfigError("config: tcrit needs 0 < T_lo < T_hi, scan_step > 0, resolution > 0");
  for (int n : c.scaling.n_list)
    if (n <= 0 || n % 2 != 0) throw ConfigError("config: scaling.n_list entries must be even and positive");
  for (double T : c.compare.temperatures)
    if (!(T > 0.0)) throw ConfigError("config: compare.temperatures must be > 0");
  if (!(c.compare.dT > 0.0)) throw ConfigError("config: compare.dT must be > 0");
  if (!(c.solve_T > 0.0)) throw ConfigError("config: solve.T must be > 0");
  for (const auto& f : c.outputs.formats)
    if (f != "csv" && f != "json") throw ConfigError("config: unknown output format '" + f + "'");
}

inline RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& schema = detail::config_schema();
  RunConfig c;
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
      const std::string name = section + "." + key;
      const std::string v = node.data();
      using namespace detail;
      if (section == "model") {
        if (key == "omega") c.model.omega = parse_int(name, v);
        else if (key == "lambda_cut") c.model.lambda_cut = parse_double(name, v);
        else if (key == "n") c.model.n = parse_int(name, v);
        else if (key == "mu") c.model.mu = parse_double(name, v);
        else if (key == "target_gap") c.model.target_gap = parse_double(name, v);
        else if (key == "g") c.model.g = parse_double(name, v);
        else if (key == "wick_diagonal") c.model.wick_diagonal = parse_bool(name, v);
      } else if (section == "grid") {
        c.grid_nodes = parse_int(name, v);
      } else if (section == "solver") {
        auto& s = c.solver;
        if (key == "max_iter") s.max_iter = parse_int(name, v);
        else if (key == "tol_state") s.tol_state = parse_double(name, v);
        else if (key == "tol_grad") s.tol_grad = parse_double(name, v);
        else if (key == "mixing") s.mixing = parse_double(name, v);
        else if (key == "descent_step") s.descent_step = parse_double(name, v);
        else if (key == "fd_step") s.fd_step = parse_double(name, v);
        else if (key == "anderson_depth") s.anderson_depth = parse_int(name, v);
        else if (key == "number_tolerance") s.number_tolerance = parse_double(name, v);
        else if (key == "max_mu_iter") s.max_mu_iter = parse_int(name, v);
      } else if (section == "sweep") {
        if (key == "T_min") c.sweep.T_min = parse_double(name, v);
        else if (key == "T_max") c.sweep.T_max = parse_double(name, v);
        else if (key == "dT") c.sweep.dT = parse_double(name, v);
        else if (key == "schemes") {
          c.sweep.schemes.clear();
          for (const auto& s : split_list(v)) c.sweep.schemes.push_back(parse_scheme(name, s));
        }
      } else if (section == "tcrit") {
        if (key == "T_lo") c.tcrit.T_lo = parse_double(name, v);
        else if (key == "T_hi") c.tcrit.T_hi = parse_double(name, v);
        else if (key == "scan_step") c.tcrit.scan_step = parse_double(name, v);
        else if (key == "resolution") c.tcrit.resolution = parse_double(name, v);
      } else if (section == "scaling") {
        if (key == "n_list") {
          c.scaling.n_list.clear();
          for (const auto& s : split_list(v)) c.scaling.n_list.push_back(parse_int(name, s));
        } else if (key == "scheme") {
          c.scaling.scheme = parse_scheme(name, v);
        }
      } else if (section == "compare") {
        if (key == "temperatures") {
          c.compare.temperatures.clear();
          for (const auto& s : split_list(v)) c.compare.temperatures.push_back(parse_double(name, s));
        } else if (key == "dT") {
          c.compare.dT = parse_double(name, v);
        }
      } else if (section == "solve") {
        c.solve_T = parse_double(name, v);
      } else if (section == "outputs") {
        if (key == "directory") c.outputs.directory = trim(v);
        else if (key == "formats") c.outputs.formats = split_list(v);
      }
    }
  }
  validate(c);
  return c;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in);
}

/// Effective configuration (defaults filled in) as canonical INI text; the
/// config hash is taken over this without the outputs block, so equivalent
/// files hash equal and redirecting output does not change the hash.
inline std::string canonical_text(const RunConfig& c, bool with_outputs = true) {
  auto num = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  auto schemes = [](const std::vector<Scheme>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::string(to_string(v[i]));
    return s;
  };
  std::ostringstream o;
  o << "[model]\nomega=" << c.model.omega << "\nlambda_cut=" << num(c.model.lambda_cut) << "\nn=" << c.model.n
    << "\nmu=" << num(c.model.mu) << "\ntarget_gap=" << num(c.model.target_gap)
    << "\ng=" << (c.model.g ? num(*c.model.g) : std::string("calibrated"))
    << "\nwick_diagonal=" << (c.model.wick_diagonal ? "true" : "false") << "\n";
  o << "[grid]\nnodes=" << c.grid_nodes << "\n";
  const auto& s = c.solver;
  o << "[solver]\nmax_iter=" << s.max_iter << "\ntol_state=" << num(s.tol_state) << "\ntol_grad=" << num(s.tol_grad)
    << "\nmixing=" << num(s.mixing) << "\ndescent_step=" << num(s.descent_step) << "\nfd_step=" << num(s.fd_step)
    << "\nanderson_depth=" << s.anderson_depth << "\nnumber_tolerance=" << num(s.number_tolerance)
    << "\nmax_mu_iter=" << s.max_mu_iter << "\n";
  o << "[sweep]\nT_min=" << num(c.sweep.T_min) << "\nT_max=" << num(c.sweep.T_max) << "\ndT=" << num(c.sweep.dT)
    << "\nschemes=" << schemes(c.sweep.schemes) << "\n";
  o << "[tcrit]\nT_lo=" << num(c.tcrit.T_lo) << "\nT_hi=" << num(c.tcrit.T_hi)
    << "\nscan_step=" << num(c.tcrit.scan_step) << "\nresolution=" << num(c.tcrit.resolution) << "\n";
  o << "[scaling]\nn_list=";
  for (std::size_t i = 0; i < c.scaling.n_list.size(); ++i) o << (i ? "," : "") << c.scaling.n_list[i];
  o << "\nscheme=" << to_string(c.scaling.scheme) << "\n";
  o << "[compare]\ntemperatures=";
  for (std::size_t i = 0; i < c.compare.temperatures.size(); ++i) o << (i ? "," : "") << num(c.compare.temperatures[i]);
  o << "\ndT=" << num(c.compare.dT) << "\n";
  o << "[solve]\nT=" << num(c.solve_T) << "\n";
  if (!with_outputs) return o.str();
  o << "[outputs]\ndirectory=" << c.outputs.directory << "\nformats=";
  for (std::size_t i = 0; i < c.outputs.formats.size(); ++i) o << (i ? "," : "") << c.outputs.formats[i];
  o << "\n";
  return o.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(c, false))));
  return buf;
}

}  // namespace pairtherm
