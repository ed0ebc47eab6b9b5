#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sparseoc/dynamics.hpp"
#include "sparseoc/errors.hpp"
#include "sparseoc/grid.hpp"
#include "sparseoc/hjb.hpp"
#include "sparseoc/penalty.hpp"

namespace sparseoc {

/// One run definition: system, domain, penalty, constraint, target, solver
/// knobs, rollout defaults, and output directory. Loaded from a sectioned
/// key = value text file; unknown keys are rejected with their line number.
struct RunConfig {
  // [system]
  std::string system_name = "eikonal";
  std::optional<Eigen::MatrixXd> A, B;  // linear systems only

  // [domain]
  Eigen::VectorXd lower, upper;
  std::vector<int> nodes;

  // [penalty]
  PenaltyParams penalty;

  // [constraint]
  Eigen::VectorXd rho;

  // [cost]
  Eigen::VectorXd target;

  // [solver]
  SolverConfig solver;

  // [simulate]
  double sim_dt = 0.0;  // 0: use the solver step
  double t_max = 20.0;
  double stop_radius = 0.0;  // 0: run to t_max

  // [output]
  std::string out_dir = "out";
};

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = -1;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& tok, int line) {
  const std::string t = trim(tok);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + t + "'", line);
  }
  if (pos != t.size()) throw ConfigError("trailing characters after number '" + t + "'", line);
  return v;
}

inline std::vector<double> parse_list(const std::string& val, int line) {
  std::vector<double> out;
  std::stringstream ss(val);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double(tok, line));
  if (out.empty()) throw ConfigError("empty value", line);
  return out;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace detail

/// Parses the sectioned text format. Lines are `[section]` headers or
/// `key = value`; `#` starts a comment; list values are comma separated.
inline RunConfig parse_run_config(std::istream& in) {
  std::map<std::string, detail::ConfigEntry> entries;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", lineno);
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("empty section name", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("expected key = value", lineno);
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", lineno);
    const std::string full = section + "." + key;
    if (entries.count(full)) throw ConfigError("duplicate key '" + full + "'", lineno);
    entries[full] = {value, lineno};
  }

  static const std::set<std::string> known = {
      "system.name",        "system.state_dim",   "system.control_dim",
      "system.a",           "system.b",
      "domain.lower",       "domain.upper",       "domain.nodes",
      "penalty.p",          "penalty.q",          "penalty.gamma",      "penalty.lambda",
      "constraint.rho",
      "cost.target",
      "solver.mode",        "solver.dt",          "solver.control_resolution",
      "solver.tol",         "solver.max_iters",   "solver.active_tol",
      "simulate.sim_dt",    "simulate.t_max",     "simulate.stop_radius",
      "output.dir"};
  for (const auto& [key, entry] : entries)
    if (!known.count(key)) throw ConfigError("unknown configuration key '" + key + "'", entry.line);

  auto get = [&](const std::string& key) -> const detail::ConfigEntry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  auto require = [&](const std::string& key) -> const detail::ConfigEntry& {
    const auto* e = get(key);
    if (!e) throw ConfigError("missing required key '" + key + "'");
    return *e;
  };
  auto number = [&](const std::string& key, double fallback) {
    const auto* e = get(key);
    return e ? detail::parse_double(e->value, e->line) : fallback;
  };

  RunConfig cfg;
  cfg.system_name = require("system.name").value;

  if (cfg.system_name == "linear") {
    const auto& de = require("system.state_dim");
    const auto& me = require("system.control_dim");
    const int d = static_cast<int>(detail::parse_double(de.value, de.line));
    const int m = static_cast<int>(detail::parse_double(me.value, me.line));
    if (d < 1 || m < 1) throw ConfigError("linear system dimensions must be positive", de.line);
    const auto& ae = require("system.a");
    const auto& be = require("system.b");
    const auto av = detail::parse_list(ae.value, ae.line);
    const auto bv = detail::parse_list(be.value, be.line);
    if (static_cast<int>(av.size()) != d * d)
      throw ConfigError("system.a must hold state_dim^2 row-major entries", ae.line);
    if (static_cast<int>(bv.size()) != d * m)
      throw ConfigError("system.b must hold state_dim*control_dim row-major entries", be.line);
    Eigen::MatrixXd A(d, d), B(d, m);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) A(r, c) = av[static_cast<std::size_t>(r * d + c)];
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < m; ++c) B(r, c) = bv[static_cast<std::size_t>(r * m + c)];
    cfg.A = A;
    cfg.B = B;
  } else if (get("system.a") || get("system.b") || get("system.state_dim") ||
             get("system.control_dim")) {
    throw ConfigError("matrix keys are only valid for system.name = linear");
  }

  {
    const auto& lo = require("domain.lower");
    const auto& hi = require("domain.upper");
    const auto& nd = require("domain.nodes");
    cfg.lower = detail::to_vector(detail::parse_list(lo.value, lo.line));
    cfg.upper = detail::to_vector(detail::parse_list(hi.value, hi.line));
    for (double n : detail::parse_list(nd.value, nd.line)) cfg.nodes.push_back(static_cast<int>(n));
  }

  cfg.penalty.p = number("penalty.p", 1.0);
  cfg.penalty.q = number("penalty.q", 1.0);
  cfg.penalty.gamma = number("penalty.gamma", 1.0);
  cfg.penalty.lambda = number("penalty.lambda", 1.0);

  {
    const auto& re = require("constraint.rho");
    cfg.rho = detail::to_vector(detail::parse_list(re.value, re.line));
    const auto& te = require("cost.target");
    cfg.target = detail::to_vector(detail::parse_list(te.value, te.line));
  }

  if (const auto* e = get("solver.mode")) {
    if (e->value == "value_iteration")
      cfg.solver.mode = SolveMode::value_iteration;
    else if (e->value == "policy_iteration")
      cfg.solver.mode = SolveMode::policy_iteration;
    else
      throw ConfigError("unknown solver.mode '" + e->value + "'", e->line);
  }
  cfg.solver.dt = number("solver.dt", 0.0);
  cfg.solver.control_resolution = static_cast<int>(number("solver.control_resolution", 21));
  cfg.solver.tol = number("solver.tol", 1e-6);
  cfg.solver.max_iters = static_cast<int>(number("solver.max_iters", 20000));
  cfg.solver.active_tol = number("solver.active_tol", 0.0);

  cfg.sim_dt = number("simulate.sim_dt", 0.0);
  cfg.t_max = number("simulate.t_max", 20.0);
  cfg.stop_radius = number("simulate.stop_radius", 0.0);

  if (const auto* e = get("output.dir")) cfg.out_dir = e->value;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in);
}

inline ControlAffineSystem build_system(const RunConfig& cfg) {
  return make_builtin(cfg.system_name, cfg.A, cfg.B);
}

inline RegularGrid build_grid(const RunConfig& cfg) {
  return RegularGrid(cfg.lower, cfg.upper, cfg.nodes);
}

inline BoxConstraint build_box(const RunConfig& cfg) {
  BoxConstraint box{cfg.rho};
  box.validate();
  return box;
}

inline CostParams build_cost(const RunConfig& cfg) {
  cfg.penalty.validate();
  return CostParams{cfg.target, cfg.penalty};
}

/// Cross-checks the pieces against each other (dimensions, domain/target
/// consistency) and throws ConfigError on mismatch.
inline void validate_run_config(const RunConfig& cfg) {
  const ControlAffineSystem sys = build_system(cfg);
  if (cfg.lower.size() != sys.state_dim)
    throw ConfigError("domain dimension does not match the system state dimension");
  if (cfg.upper.size() != sys.state_dim || static_cast<int>(cfg.nodes.size()) != sys.state_dim)
    throw ConfigError("domain bounds/nodes dimension mismatch");
  if (cfg.rho.size() != sys.control_dim)
    throw ConfigError("constraint.rho length does not match the control dimension");
  if (cfg.target.size() != sys.state_dim)
    throw ConfigError("cost.target dimension does not match the state dimension");
  build_box(cfg);
  build_cost(cfg);
  build_grid(cfg);
  cfg.solver.validate();
  if (cfg.sim_dt < 0.0 || !(cfg.t_max > 0.0) || cfg.stop_radius < 0.0)
    throw ConfigError("invalid [simulate] settings");
}

}  // namespace sparseoc
