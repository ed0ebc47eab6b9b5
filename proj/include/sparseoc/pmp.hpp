#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sparseoc/dynamics.hpp"
#include "sparseoc/errors.hpp"
#include "sparseoc/penalty.hpp"

namespace sparseoc {

/// Finite truncation of the temporal grid 0 = t_0 < t_1 < ... < t_K with the
/// exact discount weights b_k of each interval.
struct TimeGrid {
  std::vector<double> knots;
  std::vector<double> weights;

  TimeGrid(std::vector<double> knots_in, double lambda) : knots(std::move(knots_in)) {
    if (knots.size() < 2) throw std::invalid_argument("TimeGrid: need at least one interval");
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      if (!(knots[k] < knots[k + 1]))
        throw std::invalid_argument("TimeGrid: knots must be strictly increasing");
      weights.push_back(weight_bk(lambda, knots[k], knots[k + 1]));
    }
  }

  static TimeGrid uniform(double T, int intervals, double lambda) {
    if (!(T > 0.0) || intervals < 1) throw std::invalid_argument("TimeGrid: bad horizon");
    std::vector<double> knots(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k)
      knots[static_cast<std::size_t>(k)] = T * static_cast<double>(k) / intervals;
    return TimeGrid(std::move(knots), lambda);
  }

  int intervals() const { return static_cast<int>(weights.size()); }
  double horizon() const { return knots.back(); }
};

struct LinearSystem {
  Eigen::MatrixXd A, B;

  void validate() const {
    if (A.rows() != A.cols() || A.rows() < 1) throw std::invalid_argument("LinearSystem: A not square");
    if (B.rows() != A.rows() || B.cols() < 1) throw std::invalid_argument("LinearSystem: bad B");
    if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("LinearSystem: non-finite entries");
  }
  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }
};

/// Dense state samples: `substeps` RK4 steps per grid interval, so sample
/// j = k*substeps + s sits at knot_k + s/substeps of interval k.
struct StatePath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  int substeps = 1;
};

/// Dense adjoint samples on the same time points as the forward path;
/// the terminal sample is the truncation surrogate phi(T) = 0.
struct AdjointPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> phi;
  int substeps = 1;
};

inline StatePath integrate_forward(const LinearSystem& sys, const TimeGrid& grid,
                                   const std::vector<Eigen::VectorXd>& controls,
                                   const Eigen::VectorXd& x0, int substeps) {
  sys.validate();
  if (static_cast<int>(controls.size()) != grid.intervals())
    throw std::invalid_argument("integrate_forward: one control per interval required");
  if (x0.size() != sys.state_dim()) throw std::invalid_argument("integrate_forward: bad x0");
  if (substeps < 1) throw std::invalid_argument("integrate_forward: substeps >= 1");

  StatePath path;
  path.substeps = substeps;
  path.times.push_back(grid.knots.front());
  path.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < grid.intervals(); ++k) {
    const Eigen::VectorXd bu = sys.B * controls[static_cast<std::size_t>(k)];
    const double h = (grid.knots[static_cast<std::size_t>(k) + 1] - grid.knots[static_cast<std::size_t>(k)]) / substeps;
    for (int s = 0; s < substeps; ++s) {
      const Eigen::VectorXd k1 = sys.A * x + bu;
      const Eigen::VectorXd k2 = sys.A * (x + 0.5 * h * k1) + bu;
      const Eigen::VectorXd k3 = sys.A * (x + 0.5 * h * k2) + bu;
      const Eigen::VectorXd k4 = sys.A * (x + h * k3) + bu;
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite() || x.norm() > 1e12)
        throw NumericError("integrate_forward: numeric blowup");
      path.times.push_back(grid.knots[static_cast<std::size_t>(k)] + (s + 1) * h);
      path.states.push_back(x);
    }
  }
  return path;
}

namespace detail {

/// Piecewise-linear lookup on a stored path.
inline Eigen::VectorXd sample_path(const std::vector<double>& times,
                                   const std::vector<Eigen::VectorXd>& values, double t) {
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto j = static_cast<std::size_t>(it - times.begin());
  const double t0 = times[j - 1], t1 = times[j];
  const double w = (t - t0) / (t1 - t0);
  return (1.0 - w) * values[j - 1] + w * values[j];
}

}  // namespace detail

/// Backward RK4 solve of -phi' = A^T phi + e^(-lambda t)(y(t) - y_d) from
/// phi(T) = 0; the source state is interpolated from the stored path.
inline AdjointPath integrate_adjoint(const LinearSystem& sys, const StatePath& path,
                                     const CostParams& cost) {
  sys.validate();
  if (path.times.size() < 2) throw std::invalid_argument("integrate_adjoint: empty path");
  const double lambda = cost.penalty.lambda;
  auto rhs = [&](double t, const Eigen::VectorXd& phi) {
    return (-(sys.A.transpose() * phi) -
            std::exp(-lambda * t) * (detail::sample_path(path.times, path.states, t) - cost.y_d))
        .eval();
  };
  AdjointPath adj;
  adj.substeps = path.substeps;
  adj.times = path.times;
  adj.phi.assign(path.times.size(), Eigen::VectorXd::Zero(sys.state_dim()));
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(sys.state_dim());
  for (auto j = path.times.size() - 1; j > 0; --j) {
    const double t1 = path.times[j], t0 = path.times[j - 1];
    const double h = t0 - t1;  // negative: integrating backward
    const Eigen::VectorXd k1 = rhs(t1, phi);
    const Eigen::VectorXd k2 = rhs(t1 + 0.5 * h, phi + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(t1 + 0.5 * h, phi + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(t0, phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!phi.allFinite()) throw NumericError("integrate_adjoint: numeric blowup");
    adj.phi[j - 1] = phi;
  }
  return adj;
}

/// phi_k = integral of B^T phi over interval k (composite trapezoid over the
/// stored samples).
inline Eigen::VectorXd interval_gradient(const AdjointPath& adj, const LinearSystem& sys,
                                         const TimeGrid& grid, int k) {
  if (k < 0 || k >= grid.intervals()) throw std::invalid_argument("interval_gradient: bad k");
  const auto s = static_cast<std::size_t>(adj.substeps);
  const auto base = static_cast<std::size_t>(k) * s;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(sys.state_dim());
  for (std::size_t j = base; j < base + s; ++j) {
    const double h = adj.times[j + 1] - adj.times[j];
    acc += 0.5 * h * (adj.phi[j] + adj.phi[j + 1]);
  }
  return sys.B.transpose() * acc;
}

/// All per-interval linear coefficients phi_k and penalty weights
/// gamma_k = gamma b_k.
struct IntervalGradients {
  std::vector<Eigen::VectorXd> phi_k;
  std::vector<double> gamma_k;
};

inline IntervalGradients all_interval_gradients(const AdjointPath& adj, const LinearSystem& sys,
                                                const TimeGrid& grid, double gamma) {
  IntervalGradients g;
  for (int k = 0; k < grid.intervals(); ++k) {
    g.phi_k.push_back(interval_gradient(adj, sys, grid, k));
    g.gamma_k.push_back(gamma * grid.weights[static_cast<std::size_t>(k)]);
  }
  return g;
}

/// Discretized cost J^Delta truncated at the grid horizon: trapezoid
/// quadrature of the discounted tracking error over the dense path plus the
/// exact interval-weighted control penalty.
inline double discretized_cost(const LinearSystem& sys, const TimeGrid& grid,
                               const CostParams& cost,
                               const std::vector<Eigen::VectorXd>& controls,
                               const Eigen::VectorXd& x0, int substeps) {
  const StatePath path = integrate_forward(sys, grid, controls, x0, substeps);
  const double lambda = cost.penalty.lambda;
  double track = 0.0;
  for (std::size_t j = 0; j + 1 < path.times.size(); ++j) {
    const double h = path.times[j + 1] - path.times[j];
    const double a = std::exp(-lambda * path.times[j]) * 0.5 * (path.states[j] - cost.y_d).squaredNorm();
    const double b = std::exp(-lambda * path.times[j + 1]) * 0.5 * (path.states[j + 1] - cost.y_d).squaredNorm();
    track += 0.5 * h * (a + b);
  }
  double pen = 0.0;
  for (int k = 0; k < grid.intervals(); ++k)
    pen += grid.weights[static_cast<std::size_t>(k)] *
           penalty_eval(controls[static_cast<std::size_t>(k)], cost.penalty);
  return track + cost.penalty.gamma * pen;
}

/// Forward-backward sweep outcome. `change_history[i]` counts intervals whose
/// control moved in sweep i; `cost_history` records J^Delta before each
/// update.
struct SweepResult {
  std::vector<Eigen::VectorXd> controls;
  bool converged = false;
  std::vector<int> change_history;
  std::vector<double> cost_history;
  int iterations = 0;
};

/// Iterates forward solve / adjoint solve / per-interval minimize_box until
/// the control sequence reproduces itself exactly (the candidate set is
/// finite). A revisited non-adjacent sequence is reported as a cycle; the
/// sweep characterizes fixed points, it does not guarantee convergence.
inline SweepResult forward_backward_sweep(const LinearSystem& sys, const TimeGrid& grid,
                                          const CostParams& cost, const BoxConstraint& box,
                                          const Eigen::VectorXd& x0, int substeps, int max_outer,
                                          std::vector<Eigen::VectorXd> init = {}) {
  sys.validate();
  box.validate();
  cost.penalty.validate();
  const int K = grid.intervals();
  const int m = sys.control_dim();
  if (init.empty()) init.assign(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(m));
  if (static_cast<int>(init.size()) != K)
    throw std::invalid_argument("forward_backward_sweep: bad initial controls");

  auto flatten = [m, K](const std::vector<Eigen::VectorXd>& u) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(K) * static_cast<std::size_t>(m));
    for (const auto& v : u) flat.insert(flat.end(), v.data(), v.data() + v.size());
    return flat;
  };

  SweepResult out;
  out.controls = std::move(init);
  std::vector<std::vector<double>> seen{flatten(out.controls)};

  for (int it = 1; it <= max_outer; ++it) {
    out.iterations = it;
    out.cost_history.push_back(discretized_cost(sys, grid, cost, out.controls, x0, substeps));
    const StatePath path = integrate_forward(sys, grid, out.controls, x0, substeps);
    const AdjointPath adj = integrate_adjoint(sys, path, cost);
    const IntervalGradients grads = all_interval_gradients(adj, sys, grid, cost.penalty.gamma);

    std::vector<Eigen::VectorXd> next(static_cast<std::size_t>(K));
    int changed = 0;
    for (int k = 0; k < K; ++k) {
      const PointwiseProblem prob{grads.phi_k[static_cast<std::size_t>(k)],
                                  grads.gamma_k[static_cast<std::size_t>(k)]};
      next[static_cast<std::size_t>(k)] = minimize_box(prob, box, cost.penalty).u;
      if (next[static_cast<std::size_t>(k)] != out.controls[static_cast<std::size_t>(k)]) ++changed;
    }
    out.change_history.push_back(changed);
    if (changed == 0) {
      out.converged = true;
      return out;
    }
    const std::vector<double> key = flatten(next);
    for (std::size_t prev = 0; prev + 1 < seen.size(); ++prev) {
      if (seen[prev] == key)
        throw SolverError("forward_backward_sweep: control sequence cycles with length " +
                          std::to_string(seen.size() - prev));
    }
    seen.push_back(key);
    out.controls = std::move(next);
  }
  return out;  // converged = false
}

/// Per-interval optimality slack of a candidate control sequence against the
/// brute-force oracle, with gradients recomputed at that sequence.
struct IntervalOptimalityReport {
  std::vector<double> slack;
  double max_slack = 0.0;

  bool all_within(double tol) const { return max_slack <= tol; }
};

inline IntervalOptimalityReport verify_interval_optimality(
    const std::vector<Eigen::VectorXd>& controls, const LinearSystem& sys, const TimeGrid& grid,
    const CostParams& cost, const BoxConstraint& box, const Eigen::VectorXd& x0, int substeps,
    int oracle_resolution) {
  const StatePath path = integrate_forward(sys, grid, controls, x0, substeps);
  const AdjointPath adj = integrate_adjoint(sys, path, cost);
  const IntervalGradients grads = all_interval_gradients(adj, sys, grid, cost.penalty.gamma);

  IntervalOptimalityReport rep;
  rep.max_slack = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.intervals(); ++k) {
    const PointwiseProblem prob{grads.phi_k[static_cast<std::size_t>(k)],
                                grads.gamma_k[static_cast<std::size_t>(k)]};
    const double here = pointwise_objective(prob, controls[static_cast<std::size_t>(k)], cost.penalty);
    const double oracle = brute_force_min(prob, box, cost.penalty, oracle_resolution).value;
    rep.slack.push_back(here - oracle);
    rep.max_slack = std::max(rep.max_slack, rep.slack.back());
  }
  return rep;
}

}  // namespace sparseoc
