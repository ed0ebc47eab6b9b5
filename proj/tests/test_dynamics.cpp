#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sparseoc/dynamics.hpp"

using namespace sparseoc;

namespace {

Eigen::VectorXd vec2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }

}  // namespace

TEST_CASE("eval_rhs on the builtin systems") {
  const auto eikonal = make_eikonal();
  CHECK(eval_rhs(eikonal, vec2(0.3, -0.7), vec2(0.1, 0.2)) == vec2(0.1, 0.2));

  const auto dw = make_double_well();
  CHECK(eval_rhs(dw, vec2(1.0, 0.0), vec2(0.0, 0.0)) == vec2(0.0, 0.0));
  CHECK(eval_rhs(dw, vec2(-1.0, 0.0), vec2(0.0, 0.0)) == vec2(0.0, 0.0));

  // u = 0 reduces to the drift
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = vec2(u(rng), u(rng));
    CHECK(eval_rhs(dw, x, vec2(0, 0)) == dw.drift(x));
  }

  CHECK_THROWS_AS(eval_rhs(eikonal, vec2(0, 0), Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("bilinear double well: second input vanishes at x = 0") {
  const auto dwb = make_double_well(true);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double v = u(rng), u2 = u(rng);
    const Eigen::VectorXd with = eval_rhs(dwb, vec2(0.0, v), vec2(0.0, u2));
    const Eigen::VectorXd without = eval_rhs(dwb, vec2(0.0, v), vec2(0.0, 0.0));
    CHECK(with == without);
  }
}

TEST_CASE("linear(A=0, B=I) matches the eikonal system") {
  const auto lin = make_linear(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2));
  const auto eik = make_eikonal();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = vec2(u(rng), u(rng)), c = vec2(u(rng), u(rng));
    CHECK(eval_rhs(lin, x, c) == eval_rhs(eik, x, c));
  }
}

TEST_CASE("make_builtin dispatch and validation") {
  CHECK(make_builtin("eikonal").name == "eikonal");
  CHECK(make_builtin("double_well").name == "double_well");
  CHECK(make_builtin("double_well_bilinear").name == "double_well_bilinear");
  CHECK_THROWS_AS(make_builtin("unknown_system"), std::invalid_argument);
  CHECK_THROWS_AS(make_builtin("linear"), std::invalid_argument);
  CHECK_THROWS_AS(make_linear(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_linear(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2)),
                  std::invalid_argument);
}

TEST_CASE("rhs is affine in the control") {
  const auto dwb = make_double_well(true);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-2.0, 2.0), da(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd x = vec2(d(rng), d(rng));
    const Eigen::VectorXd u = vec2(d(rng), d(rng)), w = vec2(d(rng), d(rng));
    const double alpha = da(rng);
    const Eigen::VectorXd mix = eval_rhs(dwb, x, (alpha * u + (1 - alpha) * w).eval());
    const Eigen::VectorXd combo = alpha * eval_rhs(dwb, x, u) + (1 - alpha) * eval_rhs(dwb, x, w);
    CHECK((mix - combo).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("step_rk4: exact on constant rhs, fixed at equilibria") {
  const auto eik = make_eikonal();
  const Eigen::VectorXd next = step_rk4(eik, vec2(0, 0), vec2(0.5, 0.0), 0.1);
  CHECK(next[0] == Catch::Approx(0.05).epsilon(1e-15));
  CHECK(next[1] == 0.0);

  const auto dw = make_double_well();
  CHECK(step_rk4(dw, vec2(1, 0), vec2(0, 0), 0.05) == vec2(1, 0));
  CHECK(step_rk4(dw, vec2(-1, 0), vec2(0, 0), 0.05) == vec2(-1, 0));

  CHECK_THROWS_AS(step_rk4(eik, vec2(0, 0), vec2(0, 0), 0.0), std::invalid_argument);
}

TEST_CASE("step_rk4 observed order on the rotation system") {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, -1, 0;
  const auto rot = make_linear(A, Eigen::MatrixXd::Zero(2, 1));
  const Eigen::VectorXd x0 = vec2(1, 0);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);

  auto exact = [&](double t) { return vec2(std::cos(t), -std::sin(t)); };
  auto one_step_err = [&](double dt) {
    return (step_rk4(rot, x0, u, dt) - exact(dt)).norm();
  };
  const double e1 = one_step_err(0.2), e2 = one_step_err(0.1);
  CHECK(e1 / e2 >= 8.0);  // order >= 3 observed; RK4 gives ~32
  CHECK(one_step_err(0.05) < 1e-8);
}

TEST_CASE("numeric blowup raises NumericError with the offending state") {
  ControlAffineSystem bad;
  bad.state_dim = 1;
  bad.control_dim = 1;
  bad.name = "bad";
  bad.drift = [](const Eigen::VectorXd&) {
    return (Eigen::VectorXd(1) << std::nan("")).finished();
  };
  bad.control_fields = {[](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); }};
  try {
    eval_rhs(bad, Eigen::VectorXd::Constant(1, 0.75), Eigen::VectorXd::Zero(1));
    FAIL("expected NumericError");
  } catch (const NumericError& err) {
    REQUIRE(err.offending_state.size() == 1);
    CHECK(err.offending_state[0] == 0.75);
  }
}

TEST_CASE("running_cost") {
  CostParams cost;
  cost.y_d = vec2(0.5, -0.5);
  cost.penalty.p = 0.5;
  cost.penalty.q = 1.0;
  cost.penalty.gamma = 1.0;
  cost.penalty.lambda = 0.2;

  CHECK(running_cost(cost.y_d, vec2(0, 0), cost) == 0.0);
  CHECK(running_cost(cost.y_d, vec2(1, 0), cost) == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(running_cost(vec2(1.5, 0.5), vec2(0, 0), cost) == Catch::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(running_cost(Eigen::VectorXd::Zero(3), vec2(0, 0), cost),
                  std::invalid_argument);
}
