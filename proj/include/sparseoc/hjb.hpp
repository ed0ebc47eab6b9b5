#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sparseoc/dynamics.hpp"
#include "sparseoc/errors.hpp"
#include "sparseoc/grid.hpp"
#include "sparseoc/parallel.hpp"
#include "sparseoc/penalty.hpp"

namespace sparseoc {

enum class SolveMode { value_iteration, policy_iteration };

/// Knobs of the semi-Lagrangian solver. Zero-valued dt / active_tol are
/// resolved to their defaults (unit-CFL step, half the control spacing) by
/// resolve_config.
struct SolverConfig {
  double dt = 0.0;
  int control_resolution = 21;  ///< points per control axis, odd so 0 is a candidate
  double tol = 1e-6;
  int max_iters = 20000;
  SolveMode mode = SolveMode::policy_iteration;
  double active_tol = 0.0;

  void validate() const {
    if (dt < 0.0 || !std::isfinite(dt)) throw std::invalid_argument("SolverConfig: bad dt");
    if (control_resolution < 3 || control_resolution % 2 == 0)
      throw std::invalid_argument("SolverConfig: control_resolution must be odd and >= 3");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: require tol > 0");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: require max_iters >= 1");
    if (active_tol < 0.0) throw std::invalid_argument("SolverConfig: bad active_tol");
  }
};

/// Discretized control set U_h: uniform per-axis values with 0 included,
/// enumerated with axis 0 fastest. Penalty values and nonzero counts are
/// cached per candidate.
struct ControlGrid {
  Eigen::MatrixXd candidates;        // m x count
  std::vector<double> penalty_vals;  // ||u_c||_p^q
  std::vector<int> nnz;
  int per_axis = 0;
  double min_spacing = 0.0;
};

inline ControlGrid make_control_grid(const BoxConstraint& box, int per_axis,
                                     const PenaltyParams& params) {
  box.validate();
  if (per_axis < 3 || per_axis % 2 == 0)
    throw std::invalid_argument("make_control_grid: per-axis resolution must be odd and >= 3");
  const int m = box.dim();
  const double count_d = std::pow(static_cast<double>(per_axis), m);
  if (count_d > 4e6) throw CapacityError("make_control_grid: control set too large");
  const auto count = static_cast<std::int64_t>(count_d + 0.5);

  ControlGrid grid;
  grid.per_axis = per_axis;
  grid.candidates.resize(m, count);
  grid.penalty_vals.resize(static_cast<std::size_t>(count));
  grid.nnz.resize(static_cast<std::size_t>(count));
  grid.min_spacing = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i)
    grid.min_spacing = std::min(grid.min_spacing, 2.0 * box.rho[i] / (per_axis - 1));

  std::int64_t c = 0;
  detail::scan_product_grid(box.rho, per_axis, [&](const Eigen::VectorXd& u) {
    grid.candidates.col(c) = u;
    grid.penalty_vals[static_cast<std::size_t>(c)] = penalty_eval(u, params);
    grid.nnz[static_cast<std::size_t>(c)] = detail::count_nonzero(u);
    ++c;
  });
  return grid;
}

/// Solver configuration with the data-dependent defaults filled in.
struct EffectiveConfig {
  SolverConfig cfg;
  double dt = 0.0;
  double discount = 0.0;  // e^(-lambda dt)
  double active_tol = 0.0;
};

namespace detail {

/// Bound on sup ||f(x,u)|| over nodes and control-box vertices; the norm of a
/// control-affine rhs is convex in u, so vertices suffice.
inline double max_speed(const ControlAffineSystem& sys, const RegularGrid& grid,
                        const BoxConstraint& box) {
  const int m = box.dim();
  std::vector<Eigen::VectorXd> vertices;
  if (m <= 12) {
    for (std::int64_t mask = 0; mask < (std::int64_t{1} << m); ++mask) {
      Eigen::VectorXd u(m);
      for (int i = 0; i < m; ++i) u[i] = (mask >> i) & 1 ? box.rho[i] : -box.rho[i];
      vertices.push_back(std::move(u));
    }
  } else {
    vertices.push_back(box.rho);
    vertices.push_back(-box.rho);
  }
  double fmax = 0.0;
  for (std::int64_t node = 0; node < grid.num_nodes(); ++node) {
    const Eigen::VectorXd x = grid.coords(node);
    auto [f0, F] = eval_fields(sys, x);
    for (const auto& u : vertices) fmax = std::max(fmax, (f0 + F * u).norm());
  }
  return fmax;
}

}  // namespace detail

inline EffectiveConfig resolve_config(const SolverConfig& cfg, const ControlAffineSystem& sys,
                                      const RegularGrid& grid, const BoxConstraint& box,
                                      const PenaltyParams& params) {
  cfg.validate();
  params.validate();
  EffectiveConfig eff;
  eff.cfg = cfg;
  eff.dt = cfg.dt;
  if (eff.dt == 0.0) {
    const double fmax = detail::max_speed(sys, grid, box);
    eff.dt = fmax > 1e-12 ? grid.min_spacing() / fmax : grid.min_spacing();
  }
  eff.discount = std::exp(-params.lambda * eff.dt);
  eff.active_tol = cfg.active_tol;
  if (eff.active_tol == 0.0) {
    double spacing = std::numeric_limits<double>::infinity();
    for (int i = 0; i < box.dim(); ++i)
      spacing = std::min(spacing, 2.0 * box.rho[i] / (cfg.control_resolution - 1));
    eff.active_tol = 0.5 * spacing;
  }
  return eff;
}

namespace detail {

/// Discrete Bellman operator at one point: min over U_h of
/// e^(-lambda dt) I[V](x + dt f(x,u)) + dt l(x,u). Ties go to fewer active
/// coordinates, then to the lexicographically smaller control.
inline std::pair<double, int> bellman_at_point(const ScalarField& V,
                                               const ControlAffineSystem& sys,
                                               const CostParams& cost, const ControlGrid& ctrl,
                                               double dt, double discount,
                                               const Eigen::VectorXd& x) {
  auto [f0, F] = eval_fields(sys, x);
  const double track = dt * 0.5 * (x - cost.y_d).squaredNorm();
  const double dtg = dt * cost.penalty.gamma;
  const Eigen::VectorXd xdrift = x + dt * f0;
  const Eigen::MatrixXd dtF = dt * F;
  const int d = sys.state_dim;
  const int m = sys.control_dim;
  const auto count = ctrl.candidates.cols();

  Eigen::VectorXd xn(d);
  InterpStencil st;
  double best_val = std::numeric_limits<double>::infinity();
  int best_c = 0;
  int best_nnz = std::numeric_limits<int>::max();
  for (Eigen::Index c = 0; c < count; ++c) {
    const double* u = ctrl.candidates.col(c).data();
    for (int j = 0; j < d; ++j) xn[j] = xdrift[j];
    for (int i = 0; i < m; ++i) {
      const double ui = u[i];
      if (ui != 0.0)
        for (int j = 0; j < d; ++j) xn[j] += dtF(j, i) * ui;
    }
    interp_stencil(V.grid, xn, st);
    double interp = 0.0;
    for (int k = 0; k < st.count; ++k)
      interp += st.weight[static_cast<std::size_t>(k)] *
                V.values[st.index[static_cast<std::size_t>(k)]];
    const double val = discount * interp + track + dtg * ctrl.penalty_vals[static_cast<std::size_t>(c)];
    if (val > best_val) continue;
    if (val < best_val) {
      best_val = val;
      best_c = static_cast<int>(c);
      best_nnz = ctrl.nnz[static_cast<std::size_t>(c)];
      continue;
    }
    const int n = ctrl.nnz[static_cast<std::size_t>(c)];
    if (n < best_nnz ||
        (n == best_nnz && lex_less(ctrl.candidates.col(c), ctrl.candidates.col(best_c)))) {
      best_c = static_cast<int>(c);
      best_nnz = n;
    }
  }
  return {best_val, best_c};
}

/// Full Bellman sweep: reads a frozen V, writes disjoint per-node outputs.
inline void bellman_sweep(const ScalarField& V, const ControlAffineSystem& sys,
                          const CostParams& cost, const ControlGrid& ctrl, double dt,
                          double discount, Eigen::VectorXd& out_values,
                          std::vector<int>& out_policy) {
  const auto n = V.grid.num_nodes();
  out_values.resize(n);
  out_policy.resize(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t node) {
    const auto [val, c] = bellman_at_point(V, sys, cost, ctrl, dt, discount, V.grid.coords(node));
    out_values[node] = val;
    out_policy[static_cast<std::size_t>(node)] = c;
  });
}

inline VectorField field_from_policy(const RegularGrid& grid, const ControlGrid& ctrl,
                                     const std::vector<int>& policy) {
  VectorField f;
  f.grid = grid;
  f.values.resize(ctrl.candidates.rows(), grid.num_nodes());
  for (std::int64_t node = 0; node < grid.num_nodes(); ++node)
    f.values.col(node) = ctrl.candidates.col(policy[static_cast<std::size_t>(node)]);
  return f;
}

constexpr std::int64_t kDirectEvalCap = 200'000;

/// Exact policy evaluation: solves (I - e^(-lambda dt) W_pi) V = dt l_pi with
/// a sparse LU factorization. W_pi is row-stochastic (interpolation weights of
/// each node's displaced point), so the matrix is strictly diagonally
/// dominant. Falls back to warm-started fixed-point sweeps when the grid
/// exceeds the direct-solve cap.
inline Eigen::VectorXd evaluate_policy(const ScalarField& V_warm, const ControlAffineSystem& sys,
                                       const CostParams& cost, const ControlGrid& ctrl, double dt,
                                       double discount, const std::vector<int>& policy,
                                       double tol, int max_inner) {
  const RegularGrid& grid = V_warm.grid;
  const auto n = grid.num_nodes();
  const int stencil = 1 << grid.dim();

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n) * static_cast<std::size_t>(stencil));
  std::vector<double> wgt(idx.size());
  Eigen::VectorXd rhs(n);
  parallel_for(n, [&](std::int64_t node) {
    const Eigen::VectorXd x = grid.coords(node);
    auto [f0, F] = eval_fields(sys, x);
    const Eigen::VectorXd u = ctrl.candidates.col(policy[static_cast<std::size_t>(node)]);
    const Eigen::VectorXd xn = x + dt * (f0 + F * u);
    InterpStencil st;
    interp_stencil(grid, xn, st);
    for (int k = 0; k < stencil; ++k) {
      idx[static_cast<std::size_t>(node) * stencil + k] = st.index[static_cast<std::size_t>(k)];
      wgt[static_cast<std::size_t>(node) * stencil + k] = st.weight[static_cast<std::size_t>(k)];
    }
    rhs[node] = dt * running_cost(x, u, cost);
  });

  if (n <= kDirectEvalCap) {
    trips.reserve(static_cast<std::size_t>(n) * (stencil + 1));
    for (std::int64_t node = 0; node < n; ++node) {
      trips.emplace_back(static_cast<int>(node), static_cast<int>(node), 1.0);
      for (int k = 0; k < stencil; ++k) {
        const double w = wgt[static_cast<std::size_t>(node) * stencil + k];
        if (w != 0.0)
          trips.emplace_back(static_cast<int>(node),
                             static_cast<int>(idx[static_cast<std::size_t>(node) * stencil + k]),
                             -discount * w);
      }
    }
    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success)
      throw SolverError("evaluate_policy: sparse factorization failed");
    Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SolverError("evaluate_policy: sparse solve failed");
    return sol;
  }

  // Large grids: warm-started Jacobi sweeps to the contraction-calibrated
  // tolerance.
  Eigen::VectorXd V = V_warm.values, Vn(n);
  const double target = tol * (1.0 - discount) / std::max(discount, 1e-16);
  for (int it = 0; it < max_inner; ++it) {
    parallel_for(n, [&](std::int64_t node) {
      double interp = 0.0;
      for (int k = 0; k < stencil; ++k)
        interp += wgt[static_cast<std::size_t>(node) * stencil + k] *
                  V[idx[static_cast<std::size_t>(node) * stencil + k]];
      Vn[node] = discount * interp + rhs[node];
    });
    const double resid = (Vn - V).cwiseAbs().maxCoeff();
    V.swap(Vn);
    if (resid <= target) return V;
  }
  throw SolverError("evaluate_policy: inner sweeps did not converge");
}

}  // namespace detail

/// One node of the discrete Bellman operator; exposed for operator-property
/// tests and diagnostics.
inline std::pair<double, Eigen::VectorXd> sl_bellman_update(
    const ScalarField& V, const ControlAffineSystem& sys, const CostParams& cost,
    const BoxConstraint& box, const SolverConfig& cfg, std::int64_t node) {
  const EffectiveConfig eff = resolve_config(cfg, sys, V.grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);
  const auto [val, c] =
      detail::bellman_at_point(V, sys, cost, ctrl, eff.dt, eff.discount, V.grid.coords(node));
  return {val, ctrl.candidates.col(c)};
}

/// Converged solver output. `iterations` counts Bellman sweeps for value
/// iteration and outer improvement steps for policy iteration; the feedback
/// field is the argmin of the final sweep.
struct SolveResult {
  ScalarField value;
  VectorField feedback;
  std::vector<double> residual_history;
  int iterations = 0;
  double dt = 0.0;
  double active_tol = 0.0;
};

/// Fixed-point iteration V <- T V. Converged when the contraction bound on
/// the remaining error, residual * beta/(1-beta), drops below tol; throws
/// SolverError carrying the residual history otherwise.
inline SolveResult value_iteration(const RegularGrid& grid, const ControlAffineSystem& sys,
                                   const CostParams& cost, const BoxConstraint& box,
                                   const SolverConfig& cfg,
                                   const ScalarField* V0 = nullptr) {
  sys.validate();
  const EffectiveConfig eff = resolve_config(cfg, sys, grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);
  const double err_scale = eff.discount / std::max(1.0 - eff.discount, 1e-16);

  ScalarField V = V0 ? *V0 : ScalarField::zeros(grid);
  if (V.values.size() != grid.num_nodes() || !V.values.allFinite())
    throw std::invalid_argument("value_iteration: bad initial field");
  Eigen::VectorXd Vn;
  std::vector<int> policy;
  std::vector<double> history;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    detail::bellman_sweep(V, sys, cost, ctrl, eff.dt, eff.discount, Vn, policy);
    const double resid = (Vn - V.values).cwiseAbs().maxCoeff();
    history.push_back(resid);
    V.values.swap(Vn);
    if (resid * err_scale <= cfg.tol) {
      SolveResult out;
      out.value = std::move(V);
      out.feedback = detail::field_from_policy(grid, ctrl, policy);
      out.residual_history = std::move(history);
      out.iterations = it;
      out.dt = eff.dt;
      out.active_tol = eff.active_tol;
      return out;
    }
  }
  throw SolverError("value_iteration: no convergence within max_iters", history);
}

/// Howard-style policy iteration: exact policy evaluation alternated with a
/// greedy improvement sweep. Terminates when the policy is stable and the
/// Bellman residual is below tol; the returned V is the policy-evaluation
/// solution of the final policy.
inline SolveResult policy_iteration(const RegularGrid& grid, const ControlAffineSystem& sys,
                                    const CostParams& cost, const BoxConstraint& box,
                                    const SolverConfig& cfg,
                                    const ScalarField* V0 = nullptr) {
  sys.validate();
  const EffectiveConfig eff = resolve_config(cfg, sys, grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);

  ScalarField V = V0 ? *V0 : ScalarField::zeros(grid);
  if (V.values.size() != grid.num_nodes() || !V.values.allFinite())
    throw std::invalid_argument("policy_iteration: bad initial field");

  Eigen::VectorXd TV;
  std::vector<int> policy, policy_prev;
  std::vector<double> history;
  detail::bellman_sweep(V, sys, cost, ctrl, eff.dt, eff.discount, TV, policy);

  Eigen::VectorXd V_prev_outer;
  for (int outer = 1; outer <= cfg.max_iters; ++outer) {
    V.values = detail::evaluate_policy(V, sys, cost, ctrl, eff.dt, eff.discount, policy,
                                       cfg.tol, cfg.max_iters);
    policy_prev = policy;
    detail::bellman_sweep(V, sys, cost, ctrl, eff.dt, eff.discount, TV, policy);
    const double resid = (TV - V.values).cwiseAbs().maxCoeff();
    history.push_back(resid);

    const bool stable = policy == policy_prev;
    // Equal-value argmin flips with converged values are termination too;
    // the tie-break keeps the reported policy deterministic.
    const bool value_settled =
        V_prev_outer.size() == V.values.size() &&
        (V.values - V_prev_outer).cwiseAbs().maxCoeff() <=
            1e-12 * (1.0 + V.values.cwiseAbs().maxCoeff());
    if (resid <= cfg.tol && (stable || value_settled)) {
      SolveResult out;
      out.value = std::move(V);
      out.feedback = detail::field_from_policy(grid, ctrl, policy);
      out.residual_history = std::move(history);
      out.iterations = outer;
      out.dt = eff.dt;
      out.active_tol = eff.active_tol;
      return out;
    }
    V_prev_outer = V.values;
  }
  throw SolverError("policy_iteration: no convergence within max_iters", history);
}

/// One application of the discrete Bellman operator T to a whole field;
/// used by operator-property checks (contraction, monotonicity).
inline ScalarField apply_bellman(const ScalarField& V, const ControlAffineSystem& sys,
                                 const CostParams& cost, const BoxConstraint& box,
                                 const SolverConfig& cfg) {
  const EffectiveConfig eff = resolve_config(cfg, sys, V.grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);
  ScalarField out{V.grid, Eigen::VectorXd(V.grid.num_nodes())};
  std::vector<int> policy;
  detail::bellman_sweep(V, sys, cost, ctrl, eff.dt, eff.discount, out.values, policy);
  return out;
}

/// Per-node argmin of the converged value function.
inline VectorField synthesize_feedback(const ScalarField& V, const ControlAffineSystem& sys,
                                       const CostParams& cost, const BoxConstraint& box,
                                       const SolverConfig& cfg) {
  const EffectiveConfig eff = resolve_config(cfg, sys, V.grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);
  Eigen::VectorXd vals;
  std::vector<int> policy;
  detail::bellman_sweep(V, sys, cost, ctrl, eff.dt, eff.discount, vals, policy);
  return detail::field_from_policy(V.grid, ctrl, policy);
}

/// Sample-and-hold rollout of the synthesized feedback: at each step the
/// semi-Lagrangian argmin is evaluated at the current (off-grid) state with
/// the solver's dt, the state advances by one RK4 step of sim_dt, and the
/// discounted running cost accumulates with left-endpoint quadrature.
inline Trajectory simulate_closed_loop(const ScalarField& V, const ControlAffineSystem& sys,
                                       const CostParams& cost, const BoxConstraint& box,
                                       const SolverConfig& cfg, const Eigen::VectorXd& x0,
                                       double sim_dt, double t_max, double stop_radius) {
  sys.validate();
  const EffectiveConfig eff = resolve_config(cfg, sys, V.grid, box, cost.penalty);
  const ControlGrid ctrl = make_control_grid(box, cfg.control_resolution, cost.penalty);
  if (sim_dt <= 0.0) sim_dt = eff.dt;
  if (!(t_max > 0.0)) throw std::invalid_argument("simulate_closed_loop: require t_max > 0");
  if (((x0 - project_to_domain(x0, V.grid)).cwiseAbs().maxCoeff()) > 0.0)
    throw std::invalid_argument("simulate_closed_loop: x0 outside the domain");

  Trajectory traj;
  Eigen::VectorXd x = x0;
  double t = 0.0, cum = 0.0;
  while (true) {
    const auto [val, c] = detail::bellman_at_point(V, sys, cost, ctrl, eff.dt, eff.discount, x);
    (void)val;
    const Eigen::VectorXd u = ctrl.candidates.col(c);
    const double ell = running_cost(x, u, cost);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(u);
    traj.running_costs.push_back(ell);
    traj.cumulative_costs.push_back(cum);
    if ((stop_radius > 0.0 && (x - cost.y_d).norm() < stop_radius) || t >= t_max - 1e-12) break;

    cum += std::exp(-cost.penalty.lambda * t) * ell * sim_dt;
    Eigen::VectorXd xn = step_rk4(sys, x, u, sim_dt);
    const Eigen::VectorXd xp = project_to_domain(xn, V.grid);
    if ((xp - xn).cwiseAbs().maxCoeff() > 0.0) ++traj.clamp_events;
    x = xp;
    t += sim_dt;
  }
  traj.discounted_cost = cum;
  return traj;
}

/// Fractions of grid nodes with zero, exactly one, and two-or-more active
/// control coordinates.
struct SparsityMetrics {
  double frac_zero = 0.0;
  double frac_switching = 0.0;
  double frac_multi = 0.0;
};

inline SparsityMetrics sparsity_metrics(const VectorField& feedback, double active_tol) {
  const auto n = feedback.values.cols();
  if (n == 0) return {};
  std::int64_t zero = 0, one = 0, multi = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    int active = 0;
    for (Eigen::Index i = 0; i < feedback.values.rows(); ++i)
      if (std::abs(feedback.values(i, c)) > active_tol) ++active;
    if (active == 0)
      ++zero;
    else if (active == 1)
      ++one;
    else
      ++multi;
  }
  const auto total = static_cast<double>(n);
  return {static_cast<double>(zero) / total, static_cast<double>(one) / total,
          static_cast<double>(multi) / total};
}

}  // namespace sparseoc
