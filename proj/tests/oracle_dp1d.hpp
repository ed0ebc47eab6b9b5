#pragma once

// Self-contained 1-D dynamic-programming oracle, written against plain
// arrays on purpose: it shares no code with the library it cross-checks.
//
// Problem: minimize the discounted cost of tracking the origin,
//   integral of e^(-lambda t) (x^2/2 + gamma |u|) dt,  dx/dt = u, |u| <= rho,
// on a uniform grid over [lo, hi], via the first-order semi-Lagrangian
// fixed point V(x) = min_u e^(-lambda dt) V(x + dt u) + dt (x^2/2 + gamma|u|).
//
// Discretization parameters mirror the 2-D solver so that, for p = q = 1,
// the planar problem is exactly the direct sum of two copies of this one.

#include <cmath>
#include <stdexcept>
#include <vector>

struct OracleDp1d {
  std::vector<double> xs;  // grid nodes
  std::vector<double> V;   // value per node
  std::vector<double> u;   // argmin control per node
};

inline OracleDp1d solve_oracle_dp1d(double lo, double hi, int n_nodes, double rho, double gamma,
                                    double lambda, double dt, int n_controls, double tol,
                                    int max_iters) {
  if (n_nodes < 2 || n_controls < 3 || n_controls % 2 == 0)
    throw std::invalid_argument("oracle_dp1d: bad discretization");
  const double h = (hi - lo) / (n_nodes - 1);
  const double beta = std::exp(-lambda * dt);

  OracleDp1d out;
  out.xs.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i) out.xs[i] = lo + i * h;

  std::vector<double> controls(n_controls);
  for (int j = 0; j < n_controls; ++j)
    controls[j] = rho * (2.0 * static_cast<double>(j) / (n_controls - 1) - 1.0);

  auto interp = [&](const std::vector<double>& V, double x) {
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    double s = (x - lo) / h;
    int cell = static_cast<int>(std::floor(s));
    if (cell < 0) cell = 0;
    if (cell > n_nodes - 2) cell = n_nodes - 2;
    double t = s - cell;
    if (t < 1e-13) t = 0.0;
    if (t > 1.0 - 1e-13) t = 1.0;
    return (1.0 - t) * V[cell] + t * V[cell + 1];
  };

  std::vector<double> V(n_nodes, 0.0), Vn(n_nodes), pol(n_nodes, 0.0);
  const double err_scale = beta / (1.0 - beta);
  bool converged = false;
  for (int it = 0; it < max_iters && !converged; ++it) {
    double resid = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      const double x = out.xs[i];
      double best = 1e300, best_u = 0.0;
      for (double uc : controls) {
        const double val = beta * interp(V, x + dt * uc) + dt * (0.5 * x * x + gamma * std::abs(uc));
        const bool tie = val == best;
        if (val < best ||
            (tie && ((uc == 0.0 && best_u != 0.0) ||
                     ((uc == 0.0) == (best_u == 0.0) && uc < best_u)))) {
          best = val;
          best_u = uc;
        }
      }
      Vn[i] = best;
      pol[i] = best_u;
      resid = std::max(resid, std::abs(Vn[i] - V[i]));
    }
    V.swap(Vn);
    converged = resid * err_scale <= tol;
  }
  if (!converged) throw std::runtime_error("oracle_dp1d: no convergence");
  out.V = V;
  out.u = pol;
  return out;
}
