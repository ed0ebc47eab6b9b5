#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sparseoc/config.hpp"
#include "sparseoc/io.hpp"
#include "sparseoc/runner.hpp"

using namespace sparseoc;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
# tiny eikonal instance
[system]
name = eikonal

[domain]
lower = -1, -1
upper = 1, 1
nodes = 11, 11

[penalty]
p = 1
q = 1
gamma = 1
lambda = 0.2

[constraint]
rho = 0.5, 0.5

[cost]
target = 0, 0

[solver]
mode = policy_iteration
control_resolution = 5
tol = 1e-6
max_iters = 500

[simulate]
sim_dt = 0.05
t_max = 2
stop_radius = 0

[output]
dir = out
)";

RunConfig tiny_config() {
  std::istringstream in(kTinyConfig);
  return parse_run_config(in);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sparseoc_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: values, defaults, diagnostics") {
  const RunConfig cfg = tiny_config();
  CHECK(cfg.system_name == "eikonal");
  CHECK(cfg.nodes == std::vector<int>{11, 11});
  CHECK(cfg.penalty.lambda == 0.2);
  CHECK(cfg.rho == (Eigen::VectorXd(2) << 0.5, 0.5).finished());
  CHECK(cfg.solver.mode == SolveMode::policy_iteration);
  CHECK(cfg.solver.control_resolution == 5);
  CHECK(cfg.sim_dt == 0.05);
  validate_run_config(cfg);

  {
    std::istringstream in("[system]\nname = eikonal\nbogus_key = 1\n");
    try {
      parse_run_config(in);
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("bogus_key") != std::string::npos);
      CHECK(err.line == 3);
    }
  }
  {
    std::istringstream in("[system]\nname = eikonal\nname = eikonal\n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  }
  {
    std::istringstream in("name = eikonal\n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);  // key outside a section
  }
  {
    RunConfig bad = tiny_config();
    bad.penalty.p = 0.9;
    bad.penalty.q = 0.5;
    CHECK_THROWS_AS(validate_run_config(bad), std::invalid_argument);
  }
  {
    RunConfig bad = tiny_config();
    bad.rho = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(validate_run_config(bad), ConfigError);
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/path.toml"), ConfigError);
}

TEST_CASE("linear system config") {
  std::istringstream in(R"(
[system]
name = linear
state_dim = 2
control_dim = 2
a = 0, 1, -1, 0
b = 1, 0, 0, 1
[domain]
lower = -1, -1
upper = 1, 1
nodes = 5, 5
[penalty]
p = 1
q = 1
gamma = 1
lambda = 0.5
[constraint]
rho = 1, 1
[cost]
target = 0, 0
)");
  const RunConfig cfg = parse_run_config(in);
  REQUIRE(cfg.A.has_value());
  CHECK((*cfg.A)(0, 1) == 1.0);
  CHECK((*cfg.A)(1, 0) == -1.0);
  const auto sys = build_system(cfg);
  CHECK(sys.state_dim == 2);
  const Eigen::VectorXd rhs =
      eval_rhs(sys, (Eigen::VectorXd(2) << 1, 0).finished(), Eigen::VectorXd::Zero(2));
  CHECK(rhs == (Eigen::VectorXd(2) << 0, -1).finished());
}

TEST_CASE("format_sig17 round-trips doubles bit-exactly") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int trial = 0; trial < 1000; ++trial) {
    double x = u(rng);
    if (trial % 3 == 0) x *= 1e-9;
    CHECK(std::stod(format_sig17(x)) == x);
  }
  CHECK(std::stod(format_sig17(0.1)) == 0.1);
  CHECK(std::stod(format_sig17(-0.0)) == 0.0);
}

TEST_CASE("csv round trip is bit-exact") {
  const fs::path dir = fresh_dir("csv");
  CsvTable t;
  t.header = {"a", "b", "c"};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int r = 0; r < 50; ++r) t.rows.push_back({u(rng), u(rng) * 1e-7, u(rng) * 1e5});
  write_csv(dir / "t.csv", t);
  const CsvTable back = read_csv(dir / "t.csv");
  REQUIRE(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(back.rows[r][c] == t.rows[r][c]);
}

TEST_CASE("run_solve writes reloadable, deterministic artifacts") {
  const RunConfig cfg = tiny_config();
  const fs::path dir1 = fresh_dir("solve1"), dir2 = fresh_dir("solve2");

  const SolveArtifacts art = run_solve(cfg, dir1);
  CHECK(fs::exists(dir1 / "value.csv"));
  CHECK(fs::exists(dir1 / "feedback.csv"));
  CHECK(fs::exists(dir1 / "metrics.json"));

  // reloaded values are bit-identical to the in-memory fields
  const CsvTable values = read_csv(dir1 / "value.csv");
  REQUIRE(values.rows.size() == static_cast<std::size_t>(art.result.value.grid.num_nodes()));
  for (std::size_t r = 0; r < values.rows.size(); ++r)
    CHECK(values.rows[r][2] == art.result.value.values[static_cast<Eigen::Index>(r)]);
  const CsvTable fb = read_csv(dir1 / "feedback.csv");
  for (std::size_t r = 0; r < fb.rows.size(); ++r) {
    CHECK(fb.rows[r][2] == art.result.feedback.values(0, static_cast<Eigen::Index>(r)));
    CHECK(fb.rows[r][3] == art.result.feedback.values(1, static_cast<Eigen::Index>(r)));
  }

  // metrics.json carries the resolved configuration
  const auto metrics = nlohmann::json::parse(slurp(dir1 / "metrics.json"));
  CHECK(metrics["converged"] == true);
  CHECK(metrics["config"]["solver"]["dt"].get<double>() > 0.0);
  CHECK(metrics["config"]["solver"]["active_tol"].get<double>() > 0.0);
  CHECK(metrics["sparsity"]["frac_zero"].get<double>() > 0.0);

  // identical config => byte-identical CSV outputs
  run_solve(cfg, dir2);
  CHECK(slurp(dir1 / "value.csv") == slurp(dir2 / "value.csv"));
  CHECK(slurp(dir1 / "feedback.csv") == slurp(dir2 / "feedback.csv"));
}

TEST_CASE("run_solve persists the residual history on non-convergence") {
  RunConfig cfg = tiny_config();
  cfg.solver.mode = SolveMode::value_iteration;
  cfg.solver.max_iters = 2;
  const fs::path dir = fresh_dir("noconv");
  CHECK_THROWS_AS(run_solve(cfg, dir), SolverError);
  const auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics["converged"] == false);
  CHECK(metrics["residuals"].size() == 2);
}

TEST_CASE("run_simulate: parked target and domain validation") {
  const RunConfig cfg = tiny_config();
  const fs::path dir = fresh_dir("sim");

  const Trajectory traj = run_simulate(cfg, (Eigen::VectorXd(2) << 0, 0).finished(), {}, dir);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(traj.discounted_cost <= 1e-10);
  for (const auto& x : traj.states) CHECK(x.cwiseAbs().maxCoeff() == 0.0);
  const CsvTable t = read_csv(dir / "trajectory.csv");
  CHECK(t.header == std::vector<std::string>{"t", "x1", "x2", "u1", "u2", "running_cost",
                                             "discounted_cumcost"});
  REQUIRE(t.rows.size() == traj.times.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CHECK(t.rows[r][0] == traj.times[r]);
    CHECK(t.rows[r][6] == traj.cumulative_costs[r]);
  }

  CHECK_THROWS_AS(run_simulate(cfg, (Eigen::VectorXd(2) << 5, 0).finished(), {}, dir),
                  std::invalid_argument);
}

TEST_CASE("run_sweep: rows, rejection, and failure records") {
  RunConfig cfg = tiny_config();
  const fs::path dir = fresh_dir("sweep");
  const SweepOutcome out = run_sweep(cfg, {1.0, 0.6}, {1.0}, dir);
  REQUIRE(out.rows.size() == 2);
  CHECK(out.failures.empty());
  CHECK(out.rows[0].p == 1.0);
  CHECK(out.rows[1].p == 0.6);
  const CsvTable t = read_csv(dir / "sweep.csv");
  CHECK(t.rows.size() == 2);

  const SweepOutcome bad = run_sweep(cfg, {0.8}, {0.5}, fresh_dir("sweep_bad"));
  CHECK(bad.rows.empty());
  REQUIRE(bad.failures.size() == 1);
  CHECK(bad.failures[0].find("rejected") != std::string::npos);

  CHECK_THROWS_AS(run_sweep(cfg, {}, {1.0}, dir), std::invalid_argument);
}

TEST_CASE("run_classify matches the library and prints one-based indices") {
  const auto out = run_classify((Eigen::VectorXd(2) << -0.5, -0.1).finished(),
                                (Eigen::VectorXd(2) << 1, 1).finished(), 0.5, 1.0, 0.3, true);
  CHECK(out.classification.i_plus == std::vector<int>{0});
  CHECK(out.classification.i_minus == std::vector<int>{1});
  CHECK(out.minimum.u == (Eigen::VectorXd(2) << 1, 0).finished());
  REQUIRE(out.oracle.has_value());
  CHECK(out.oracle->u == out.minimum.u);
  const std::string text = describe_classification(out);
  CHECK(text.find("I^+ = {1}") != std::string::npos);
  CHECK(text.find("I^- = {2}") != std::string::npos);

  const auto zero = run_classify(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), 0.5, 1.0,
                                 0.3, false);
  CHECK(zero.minimum.u == Eigen::VectorXd::Zero(2));
  const auto edge = run_classify((Eigen::VectorXd(1) << 0.3).finished(),
                                 (Eigen::VectorXd(1) << 1).finished(), 0.5, 1.0, 0.3, false);
  CHECK(edge.classification.i_zero == std::vector<int>{0});
}

TEST_CASE("run_balls: diamond contours and pointwise agreement") {
  const fs::path dir = fresh_dir("balls");
  const auto written = run_balls({1.0, 0.5}, {1.0}, 21, dir);
  REQUIRE(written.size() == 2);

  for (const auto& path : written) {
    const CsvTable t = read_csv(path);
    REQUIRE(t.rows.size() == 21 * 21);
    const bool is_l1 = path.string().find("p1") != std::string::npos;
    PenaltyParams params;
    params.p = is_l1 ? 1.0 : 0.5;
    params.q = 1.0;
    for (const auto& row : t.rows) {
      const Eigen::VectorXd u = (Eigen::VectorXd(2) << row[0], row[1]).finished();
      CHECK(row[2] == penalty_eval(u, params));
      if (is_l1) CHECK(row[2] == Catch::Approx(std::abs(row[0]) + std::abs(row[1])).margin(1e-15));
      if (row[1] == 0.0)
        CHECK(row[2] == Catch::Approx(std::pow(std::abs(row[0]), params.q)).margin(1e-12));
    }
  }
}
