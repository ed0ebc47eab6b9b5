// Command-line front end: solve / simulate / sweep / classify / balls.
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
// 4 runtime numeric error.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparseoc/config.hpp"
#include "sparseoc/io.hpp"
#include "sparseoc/runner.hpp"

namespace {

std::vector<double> parse_csv_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse/switching feedback synthesis for discounted optimal control"};
  app.require_subcommand(1);

  std::string config_path, out_dir, x0_str, p_str, q_str, phi_str, rho_str;
  double t_max = -1.0, p_val = 1.0, q_val = 1.0, gamma_t = 1.0;
  int resolution = 201;
  bool oracle = false;

  auto* solve = app.add_subcommand("solve", "solve the HJB fixed point and export the feedback law");
  solve->add_option("--config", config_path, "run configuration file")->required();
  solve->add_option("--out", out_dir, "output directory (default: [output].dir)");

  auto* simulate = app.add_subcommand("simulate", "roll out the synthesized feedback from x0");
  simulate->add_option("--config", config_path, "run configuration file")->required();
  simulate->add_option("--x0", x0_str, "initial state, comma separated")->required();
  simulate->add_option("--tmax", t_max, "rollout horizon override");
  simulate->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "one solve per (p,q) pair; emits a metrics table");
  sweep->add_option("--config", config_path, "run configuration file")->required();
  sweep->add_option("--p", p_str, "comma-separated p values")->required();
  sweep->add_option("--q", q_str, "comma-separated q values")->required();
  sweep->add_option("--out", out_dir, "output directory");

  auto* classify = app.add_subcommand("classify", "classify one pointwise problem and minimize it");
  classify->add_option("--phi", phi_str, "linear coefficients, comma separated")->required();
  classify->add_option("--rho", rho_str, "box bounds, comma separated")->required();
  classify->add_option("--p", p_val, "inner exponent")->required();
  classify->add_option("--q", q_val, "outer exponent")->required();
  classify->add_option("--gamma-t", gamma_t, "effective penalty weight")->required();
  classify->add_flag("--oracle", oracle, "cross-check against the brute-force oracle");
  classify->add_option("--resolution", resolution, "oracle points per axis (odd)");

  auto* balls = app.add_subcommand("balls", "sample penalty unit balls for contour plotting");
  balls->add_option("--p", p_str, "comma-separated p values")->required();
  balls->add_option("--q", q_str, "comma-separated q values")->required();
  balls->add_option("--resolution", resolution, "samples per axis");
  balls->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      const sparseoc::RunConfig cfg = sparseoc::load_run_config(config_path);
      const auto art = sparseoc::run_solve(cfg, out_dir.empty() ? cfg.out_dir : out_dir);
      std::cout << "converged in " << art.result.iterations << " iterations; frac_zero="
                << art.metrics.frac_zero << " frac_switching=" << art.metrics.frac_switching
                << " frac_multi=" << art.metrics.frac_multi << "\n";
    } else if (simulate->parsed()) {
      const sparseoc::RunConfig cfg = sparseoc::load_run_config(config_path);
      std::optional<double> tmax;
      if (t_max > 0.0) tmax = t_max;
      const auto traj = sparseoc::run_simulate(cfg, to_vector(parse_csv_list(x0_str)), tmax,
                                               out_dir.empty() ? cfg.out_dir : out_dir);
      std::cout << "rollout: " << traj.times.size() << " samples, discounted cost "
                << sparseoc::format_sig17(traj.discounted_cost)
                << (traj.clamp_events ? " (state clamped " + std::to_string(traj.clamp_events) +
                                            " times)"
                                      : "")
                << "\n";
    } else if (sweep->parsed()) {
      const sparseoc::RunConfig cfg = sparseoc::load_run_config(config_path);
      const auto out = sparseoc::run_sweep(cfg, parse_csv_list(p_str), parse_csv_list(q_str),
                                           out_dir.empty() ? cfg.out_dir : out_dir);
      for (const auto& f : out.failures) std::cerr << "sweep: " << f << "\n";
      std::cout << "sweep: " << out.rows.size() << " solves completed, " << out.failures.size()
                << " failed\n";
    } else if (classify->parsed()) {
      const auto out = sparseoc::run_classify(to_vector(parse_csv_list(phi_str)),
                                              to_vector(parse_csv_list(rho_str)), p_val, q_val,
                                              gamma_t, oracle, resolution);
      std::cout << sparseoc::describe_classification(out);
    } else if (balls->parsed()) {
      const auto written = sparseoc::run_balls(parse_csv_list(p_str), parse_csv_list(q_str),
                                               resolution, out_dir.empty() ? "out" : out_dir);
      for (const auto& path : written) std::cout << path.string() << "\n";
    }
  } catch (const sparseoc::SolverError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const sparseoc::NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  } catch (const sparseoc::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const sparseoc::CapacityError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 0;
}
