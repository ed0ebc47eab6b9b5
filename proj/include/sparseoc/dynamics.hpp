#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparseoc/errors.hpp"
#include "sparseoc/penalty.hpp"

namespace sparseoc {

/// Control-affine system dy/dt = f_0(y) + sum_i f_i(y) u_i. Evaluators must
/// be pure; systems are immutable after construction and safe to share across
/// threads.
struct ControlAffineSystem {
  int state_dim = 0;
  int control_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> control_fields;
  std::string name;
  std::optional<double> lipschitz_hint;  // documentation only

  void validate() const {
    if (state_dim < 1 || control_dim < 1)
      throw std::invalid_argument("ControlAffineSystem: bad dimensions");
    if (!drift || static_cast<int>(control_fields.size()) != control_dim)
      throw std::invalid_argument("ControlAffineSystem: missing evaluators");
  }
};

/// Drift and stacked control fields at a state: (f_0(x), [f_1(x) .. f_m(x)]).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> eval_fields(const ControlAffineSystem& sys,
                                                               const Eigen::VectorXd& x) {
  Eigen::VectorXd f0 = sys.drift(x);
  Eigen::MatrixXd F(sys.state_dim, sys.control_dim);
  for (int i = 0; i < sys.control_dim; ++i)
    F.col(i) = sys.control_fields[static_cast<std::size_t>(i)](x);
  if (f0.size() != sys.state_dim || !f0.allFinite() || !F.allFinite())
    throw NumericError("eval_fields: non-finite field evaluation",
                       {x.data(), x.data() + x.size()});
  return {std::move(f0), std::move(F)};
}

inline Eigen::VectorXd eval_rhs(const ControlAffineSystem& sys, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u) {
  if (x.size() != sys.state_dim || u.size() != sys.control_dim)
    throw std::invalid_argument("eval_rhs: dimension mismatch");
  auto [f0, F] = eval_fields(sys, x);
  return f0 + F * u;
}

/// Planar eikonal dynamics: dx_i/dt = u_i.
inline ControlAffineSystem make_eikonal() {
  ControlAffineSystem sys;
  sys.state_dim = 2;
  sys.control_dim = 2;
  sys.name = "eikonal";
  sys.drift = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); };
  sys.control_fields = {
      [](const Eigen::VectorXd&) { return (Eigen::VectorXd(2) << 1.0, 0.0).finished(); },
      [](const Eigen::VectorXd&) { return (Eigen::VectorXd(2) << 0.0, 1.0).finished(); }};
  sys.lipschitz_hint = 0.0;
  return sys;
}

/// Particle in a double-well potential with controlled damping (u_1) and a
/// second input u_2 entering directly (bilinear = false) or multiplied by the
/// position (bilinear = true). State is (x, v); uncontrolled equilibria sit
/// at (+-1, 0). Control ordering is fixed: u_1 damping first, u_2 second.
inline ControlAffineSystem make_double_well(bool bilinear = false) {
  ControlAffineSystem sys;
  sys.state_dim = 2;
  sys.control_dim = 2;
  sys.name = bilinear ? "double_well_bilinear" : "double_well";
  sys.drift = [](const Eigen::VectorXd& s) {
    Eigen::VectorXd out(2);
    out[0] = s[1];
    out[1] = -s[1] + s[0] - s[0] * s[0] * s[0];
    return out;
  };
  sys.control_fields.push_back([](const Eigen::VectorXd& s) {
    return (Eigen::VectorXd(2) << 0.0, -s[1]).finished();
  });
  if (bilinear) {
    sys.control_fields.push_back([](const Eigen::VectorXd& s) {
      return (Eigen::VectorXd(2) << 0.0, s[0]).finished();
    });
  } else {
    sys.control_fields.push_back([](const Eigen::VectorXd&) {
      return (Eigen::VectorXd(2) << 0.0, 1.0).finished();
    });
  }
  return sys;
}

/// Linear dynamics dy/dt = A y + B u.
inline ControlAffineSystem make_linear(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != A.cols() || A.rows() < 1)
    throw std::invalid_argument("make_linear: A must be square");
  if (B.rows() != A.rows() || B.cols() < 1)
    throw std::invalid_argument("make_linear: B must be d x m");
  ControlAffineSystem sys;
  sys.state_dim = static_cast<int>(A.rows());
  sys.control_dim = static_cast<int>(B.cols());
  sys.name = "linear";
  sys.drift = [A](const Eigen::VectorXd& x) { return (A * x).eval(); };
  for (int i = 0; i < sys.control_dim; ++i) {
    Eigen::VectorXd col = B.col(i);
    sys.control_fields.push_back([col](const Eigen::VectorXd&) { return col; });
  }
  return sys;
}

/// Builtin by name; A/B are required for "linear" and ignored otherwise.
inline ControlAffineSystem make_builtin(const std::string& name,
                                        const std::optional<Eigen::MatrixXd>& A = {},
                                        const std::optional<Eigen::MatrixXd>& B = {}) {
  if (name == "eikonal") return make_eikonal();
  if (name == "double_well") return make_double_well(false);
  if (name == "double_well_bilinear") return make_double_well(true);
  if (name == "linear") {
    if (!A || !B) throw std::invalid_argument("make_builtin: linear system needs A and B");
    return make_linear(*A, *B);
  }
  throw std::invalid_argument("make_builtin: unknown system '" + name + "'");
}

/// Classical 4-stage Runge-Kutta step with the control held constant.
inline Eigen::VectorXd step_rk4(const ControlAffineSystem& sys, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: require dt > 0");
  const Eigen::VectorXd k1 = eval_rhs(sys, x, u);
  const Eigen::VectorXd k2 = eval_rhs(sys, x + 0.5 * dt * k1, u);
  const Eigen::VectorXd k3 = eval_rhs(sys, x + 0.5 * dt * k2, u);
  const Eigen::VectorXd k4 = eval_rhs(sys, x + dt * k3, u);
  Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite() || next.norm() > 1e12)
    throw NumericError("step_rk4: numeric blowup", {x.data(), x.data() + x.size()});
  return next;
}

/// Tracking target plus the control penalty parameters.
struct CostParams {
  Eigen::VectorXd y_d;
  PenaltyParams penalty;
};

/// Running cost 1/2 ||x - y_d||_2^2 + gamma ||u||_p^q.
inline double running_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const CostParams& cost) {
  if (x.size() != cost.y_d.size()) throw std::invalid_argument("running_cost: state dim mismatch");
  return 0.5 * (x - cost.y_d).squaredNorm() + cost.penalty.gamma * penalty_eval(u, cost.penalty);
}

/// Sample-and-hold closed-loop record. All row vectors have equal length,
/// times are strictly increasing, and cumulative_costs[k] is the discounted
/// cost accumulated on [0, times[k]).
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> controls;
  std::vector<double> running_costs;
  std::vector<double> cumulative_costs;
  double discounted_cost = 0.0;
  int clamp_events = 0;
};

}  // namespace sparseoc
