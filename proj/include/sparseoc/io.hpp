#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparseoc/config.hpp"
#include "sparseoc/dynamics.hpp"
#include "sparseoc/errors.hpp"
#include "sparseoc/grid.hpp"
#include "sparseoc/hjb.hpp"

namespace sparseoc {

/// 17 significant digits: enough for bit-exact double round trips.
inline std::string format_sig17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal numeric CSV surface: header row, comma separator, '.' decimals.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (std::size_t c = 0; c < table.header.size(); ++c)
    out << (c ? "," : "") << table.header[c];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_sig17(row[c]);
    out << "\n";
  }
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV '" + path.string() + "'");
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) table.header.push_back(tok);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, tok, ',')) row.push_back(std::stod(tok));
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_value_csv(const std::filesystem::path& path, const ScalarField& field) {
  CsvTable t;
  for (int i = 0; i < field.grid.dim(); ++i) t.header.push_back("x" + std::to_string(i + 1));
  t.header.push_back("V");
  t.rows.reserve(static_cast<std::size_t>(field.grid.num_nodes()));
  for_each_node(field.grid, [&](std::int64_t flat, const Eigen::VectorXd& x) {
    std::vector<double> row(x.data(), x.data() + x.size());
    row.push_back(field.values[flat]);
    t.rows.push_back(std::move(row));
  });
  write_csv(path, t);
}

inline void write_feedback_csv(const std::filesystem::path& path, const VectorField& feedback,
                               double active_tol) {
  CsvTable t;
  for (int i = 0; i < feedback.grid.dim(); ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < feedback.values.rows(); ++i)
    t.header.push_back("u" + std::to_string(i + 1));
  t.header.push_back("n_active");
  t.rows.reserve(static_cast<std::size_t>(feedback.grid.num_nodes()));
  for_each_node(feedback.grid, [&](std::int64_t flat, const Eigen::VectorXd& x) {
    std::vector<double> row(x.data(), x.data() + x.size());
    int active = 0;
    for (Eigen::Index i = 0; i < feedback.values.rows(); ++i) {
      row.push_back(feedback.values(i, flat));
      if (std::abs(feedback.values(i, flat)) > active_tol) ++active;
    }
    row.push_back(static_cast<double>(active));
    t.rows.push_back(std::move(row));
  });
  write_csv(path, t);
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  CsvTable t;
  const int d = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  const int m = traj.controls.empty() ? 0 : static_cast<int>(traj.controls.front().size());
  t.header.push_back("t");
  for (int i = 0; i < d; ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < m; ++i) t.header.push_back("u" + std::to_string(i + 1));
  t.header.push_back("running_cost");
  t.header.push_back("discounted_cumcost");
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    row.insert(row.end(), traj.states[k].data(), traj.states[k].data() + d);
    row.insert(row.end(), traj.controls[k].data(), traj.controls[k].data() + m);
    row.push_back(traj.running_costs[k]);
    row.push_back(traj.cumulative_costs[k]);
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

inline nlohmann::ordered_json config_echo(const RunConfig& cfg, double effective_dt,
                                          double effective_active_tol) {
  nlohmann::ordered_json j;
  j["system"]["name"] = cfg.system_name;
  if (cfg.A) {
    j["system"]["state_dim"] = cfg.A->rows();
    j["system"]["control_dim"] = cfg.B->cols();
    j["system"]["a"] = std::vector<double>(cfg.A->data(), cfg.A->data() + cfg.A->size());
    j["system"]["b"] = std::vector<double>(cfg.B->data(), cfg.B->data() + cfg.B->size());
  }
  j["domain"]["lower"] = std::vector<double>(cfg.lower.data(), cfg.lower.data() + cfg.lower.size());
  j["domain"]["upper"] = std::vector<double>(cfg.upper.data(), cfg.upper.data() + cfg.upper.size());
  j["domain"]["nodes"] = cfg.nodes;
  j["penalty"]["p"] = cfg.penalty.p;
  j["penalty"]["q"] = cfg.penalty.q;
  j["penalty"]["gamma"] = cfg.penalty.gamma;
  j["penalty"]["lambda"] = cfg.penalty.lambda;
  j["constraint"]["rho"] = std::vector<double>(cfg.rho.data(), cfg.rho.data() + cfg.rho.size());
  j["cost"]["target"] =
      std::vector<double>(cfg.target.data(), cfg.target.data() + cfg.target.size());
  j["solver"]["mode"] =
      cfg.solver.mode == SolveMode::policy_iteration ? "policy_iteration" : "value_iteration";
  j["solver"]["dt"] = effective_dt;
  j["solver"]["control_resolution"] = cfg.solver.control_resolution;
  j["solver"]["tol"] = cfg.solver.tol;
  j["solver"]["max_iters"] = cfg.solver.max_iters;
  j["solver"]["active_tol"] = effective_active_tol;
  j["simulate"]["sim_dt"] = cfg.sim_dt;
  j["simulate"]["t_max"] = cfg.t_max;
  j["simulate"]["stop_radius"] = cfg.stop_radius;
  j["output"]["dir"] = cfg.out_dir;
  return j;
}

}  // namespace sparseoc
