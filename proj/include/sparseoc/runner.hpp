#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sparseoc/config.hpp"
#include "sparseoc/hjb.hpp"
#include "sparseoc/io.hpp"
#include "sparseoc/penalty.hpp"

namespace sparseoc {

/// Everything `solve` produced, for callers that want the in-memory result in
/// addition to the emitted files.
struct SolveArtifacts {
  SolveResult result;
  SparsityMetrics metrics;
  double wall_time_sec = 0.0;
};

/// Solves the configured problem and writes value.csv, feedback.csv and
/// metrics.json under outdir. On solver failure the residual history is
/// persisted to metrics.json before the error propagates.
inline SolveArtifacts run_solve(const RunConfig& cfg, const std::filesystem::path& outdir) {
  validate_run_config(cfg);
  std::filesystem::create_directories(outdir);

  const ControlAffineSystem sys = build_system(cfg);
  const RegularGrid grid = build_grid(cfg);
  const BoxConstraint box = build_box(cfg);
  const CostParams cost = build_cost(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  SolveArtifacts art;
  try {
    art.result = cfg.solver.mode == SolveMode::policy_iteration
                     ? policy_iteration(grid, sys, cost, box, cfg.solver)
                     : value_iteration(grid, sys, cost, box, cfg.solver);
  } catch (const SolverError& err) {
    nlohmann::ordered_json j;
    j["converged"] = false;
    j["error"] = err.what();
    j["residuals"] = err.residual_history;
    std::ofstream(outdir / "metrics.json") << j.dump(2) << "\n";
    throw;
  }
  art.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  art.metrics = sparsity_metrics(art.result.feedback, art.result.active_tol);

  write_value_csv(outdir / "value.csv", art.result.value);
  write_feedback_csv(outdir / "feedback.csv", art.result.feedback, art.result.active_tol);

  nlohmann::ordered_json j;
  j["converged"] = true;
  j["iterations"] = art.result.iterations;
  j["residuals"] = art.result.residual_history;
  j["sparsity"] = {{"frac_zero", art.metrics.frac_zero},
                   {"frac_switching", art.metrics.frac_switching},
                   {"frac_multi", art.metrics.frac_multi}};
  j["wall_time_sec"] = art.wall_time_sec;
  j["config"] = config_echo(cfg, art.result.dt, art.result.active_tol);
  std::ofstream(outdir / "metrics.json") << j.dump(2) << "\n";
  return art;
}

/// Solves (on the fly), rolls the feedback law out from x0, and writes
/// trajectory.csv.
inline Trajectory run_simulate(const RunConfig& cfg, const Eigen::VectorXd& x0,
                               std::optional<double> t_max_override,
                               const std::filesystem::path& outdir) {
  validate_run_config(cfg);
  std::filesystem::create_directories(outdir);

  const ControlAffineSystem sys = build_system(cfg);
  const RegularGrid grid = build_grid(cfg);
  const BoxConstraint box = build_box(cfg);
  const CostParams cost = build_cost(cfg);
  if (x0.size() != sys.state_dim)
    throw std::invalid_argument("simulate: x0 dimension mismatch");

  const SolveResult sol = cfg.solver.mode == SolveMode::policy_iteration
                              ? policy_iteration(grid, sys, cost, box, cfg.solver)
                              : value_iteration(grid, sys, cost, box, cfg.solver);
  const double t_max = t_max_override.value_or(cfg.t_max);
  Trajectory traj = simulate_closed_loop(sol.value, sys, cost, box, cfg.solver, x0, cfg.sim_dt,
                                         t_max, cfg.stop_radius);
  write_trajectory_csv(outdir / "trajectory.csv", traj);
  return traj;
}

struct SweepRow {
  double p = 0.0, q = 0.0;
  SparsityMetrics metrics;
  int iterations = 0;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::vector<std::string> failures;
};

/// One solve per (p, q) pair from the cross product of the two lists;
/// per-pair failures are recorded and the run continues.
inline SweepOutcome run_sweep(const RunConfig& base, const std::vector<double>& ps,
                              const std::vector<double>& qs,
                              const std::filesystem::path& outdir) {
  if (ps.empty() || qs.empty())
    throw std::invalid_argument("sweep: p and q lists must be nonempty");
  std::filesystem::create_directories(outdir);

  SweepOutcome out;
  for (double q : qs) {
    for (double p : ps) {
      const std::string tag = "p=" + format_sig17(p) + ", q=" + format_sig17(q);
      if (!(p > 0.0) || !(p <= q) || !(q <= 1.0)) {
        out.failures.push_back(tag + ": rejected, require 0 < p <= q <= 1");
        continue;
      }
      RunConfig cfg = base;
      cfg.penalty.p = p;
      cfg.penalty.q = q;
      try {
        std::ostringstream sub;
        sub << "p" << p << "_q" << q;
        const SolveArtifacts art = run_solve(cfg, outdir / sub.str());
        out.rows.push_back({p, q, art.metrics, art.result.iterations});
      } catch (const std::exception& err) {
        out.failures.push_back(tag + ": " + err.what());
      }
    }
  }

  CsvTable t;
  t.header = {"p", "q", "frac_zero", "frac_switching", "frac_multi", "iters"};
  for (const auto& row : out.rows)
    t.rows.push_back({row.p, row.q, row.metrics.frac_zero, row.metrics.frac_switching,
                      row.metrics.frac_multi, static_cast<double>(row.iterations)});
  write_csv(outdir / "sweep.csv", t);
  if (!out.failures.empty()) {
    std::ofstream f(outdir / "sweep_failures.txt");
    for (const auto& line : out.failures) f << line << "\n";
  }
  return out;
}

struct ClassifyOutput {
  IndexClassification classification;
  PointwiseMinimum minimum;
  std::optional<PointwiseMinimum> oracle;  // brute-force cross-check
};

inline ClassifyOutput run_classify(const Eigen::VectorXd& phi, const Eigen::VectorXd& rho,
                                   double p, double q, double gamma_t, bool with_oracle,
                                   int oracle_resolution = 201) {
  const PointwiseProblem prob{phi, gamma_t};
  const BoxConstraint box{rho};
  PenaltyParams params;
  params.p = p;
  params.q = q;
  ClassifyOutput out;
  out.classification = classify_indices(prob, box, q);
  out.minimum = minimize_box(prob, box, params);
  if (with_oracle) out.oracle = brute_force_min(prob, box, params, oracle_resolution);
  return out;
}

/// Prints a classification in the one-based index convention.
inline std::string describe_classification(const ClassifyOutput& out) {
  auto set_str = [](const std::vector<int>& s) {
    std::string r = "{";
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i] + 1);
    return r + "}";
  };
  std::string r;
  r += "I^- = " + set_str(out.classification.i_minus) + "\n";
  r += "I^0 = " + set_str(out.classification.i_zero) + "\n";
  r += "I^+ = " + set_str(out.classification.i_plus) + "\n";
  r += "u* = (";
  for (Eigen::Index i = 0; i < out.minimum.u.size(); ++i)
    r += (i ? ", " : "") + format_sig17(out.minimum.u[i]);
  r += ")\nvalue = " + format_sig17(out.minimum.value) + "\n";
  if (out.oracle) {
    r += "oracle u* = (";
    for (Eigen::Index i = 0; i < out.oracle->u.size(); ++i)
      r += (i ? ", " : "") + format_sig17(out.oracle->u[i]);
    r += ")\noracle value = " + format_sig17(out.oracle->value) + "\n";
  }
  return r;
}

/// Samples ||u||_p^q over [-1,1]^2 for each valid (p, q) pair and writes one
/// CSV per pair, suitable for external contour plotting.
inline std::vector<std::filesystem::path> run_balls(const std::vector<double>& ps,
                                                    const std::vector<double>& qs, int resolution,
                                                    const std::filesystem::path& outdir) {
  if (ps.empty() || qs.empty())
    throw std::invalid_argument("balls: p and q lists must be nonempty");
  if (resolution < 2) throw std::invalid_argument("balls: resolution must be >= 2");
  std::filesystem::create_directories(outdir);

  std::vector<std::filesystem::path> written;
  for (double q : qs) {
    for (double p : ps) {
      if (!(p > 0.0) || !(p <= q) || !(q <= 1.0)) continue;
      PenaltyParams params;
      params.p = p;
      params.q = q;
      CsvTable t;
      t.header = {"u1", "u2", "value"};
      Eigen::VectorXd u(2);
      for (int j = 0; j < resolution; ++j) {
        u[1] = -1.0 + 2.0 * j / (resolution - 1);
        for (int i = 0; i < resolution; ++i) {
          u[0] = -1.0 + 2.0 * i / (resolution - 1);
          t.rows.push_back({u[0], u[1], penalty_eval(u, params)});
        }
      }
      std::ostringstream name;
      name << "ball_p" << p << "_q" << q << ".csv";
      const auto path = outdir / name.str();
      write_csv(path, t);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace sparseoc
