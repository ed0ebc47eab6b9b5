#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sparseoc/errors.hpp"

namespace sparseoc {

/// Parameters of the control running cost gamma * (sum_i |u_i|^p)^(q/p),
/// discounted at rate lambda.
struct PenaltyParams {
  double p = 1.0;       ///< inner exponent, 0 < p <= 1
  double q = 1.0;       ///< outer exponent, p <= q <= 1
  double gamma = 1.0;   ///< control-cost weight, > 0
  double lambda = 1.0;  ///< discount rate, > 0

  void validate() const {
    if (!(p > 0.0) || !(p <= q) || !(q <= 1.0) || !std::isfinite(p) || !std::isfinite(q))
      throw std::invalid_argument("PenaltyParams: require 0 < p <= q <= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw std::invalid_argument("PenaltyParams: require gamma > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("PenaltyParams: require lambda > 0");
  }
};

/// Box control set { u : |u_i| <= rho_i }.
struct BoxConstraint {
  Eigen::VectorXd rho;

  void validate() const {
    if (rho.size() < 1) throw std::invalid_argument("BoxConstraint: empty bound vector");
    for (Eigen::Index i = 0; i < rho.size(); ++i)
      if (!(rho[i] > 0.0) || !std::isfinite(rho[i]))
        throw std::invalid_argument("BoxConstraint: require rho_i > 0");
  }
  int dim() const { return static_cast<int>(rho.size()); }
};

/// Euclidean control set { u : ||u||_2 <= rho }.
struct BallConstraint {
  double rho = 1.0;
  int m = 1;

  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("BallConstraint: require rho > 0");
    if (m < 1) throw std::invalid_argument("BallConstraint: require m >= 1");
  }
};

/// Partition of the control coordinates {0..m-1} by how the weighted linear
/// coefficient compares against the effective penalty weight. Indices are
/// zero-based here; command-line output prints them one-based.
struct IndexClassification {
  std::vector<int> i_minus;  ///< strictly below threshold: forced zero
  std::vector<int> i_zero;   ///< at threshold (within tolerance)
  std::vector<int> i_plus;   ///< strictly above threshold: bang-or-off
  int m = 0;

  bool is_partition() const {
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    auto mark = [&](const std::vector<int>& s) {
      for (int i : s) {
        if (i < 0 || i >= m || seen[static_cast<std::size_t>(i)]) return false;
        seen[static_cast<std::size_t>(i)] = 1;
      }
      return true;
    };
    if (!mark(i_minus) || !mark(i_zero) || !mark(i_plus)) return false;
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; });
  }
};

/// One pointwise minimization instance: minimize phi . u + gamma_t * ||u||_p^q
/// over the control set. phi collects the adjoint/control-field inner products
/// and gamma_t the discounted penalty weight.
struct PointwiseProblem {
  Eigen::VectorXd phi;
  double gamma_t = 1.0;

  void validate() const {
    if (phi.size() < 1) throw std::invalid_argument("PointwiseProblem: empty phi");
    if (!phi.allFinite()) throw std::invalid_argument("PointwiseProblem: non-finite phi");
    if (!(gamma_t > 0.0) || !std::isfinite(gamma_t))
      throw std::invalid_argument("PointwiseProblem: require gamma_t > 0");
  }
};

/// Evaluates (sum_i |u_i|^p)^(q/p). Exactly 0 for u = 0.
inline double penalty_eval(const Eigen::VectorXd& u, const PenaltyParams& params) {
  if (!u.allFinite()) throw std::invalid_argument("penalty_eval: non-finite input");
  if (u.size() < 1) throw std::invalid_argument("penalty_eval: empty control vector");
  double s = 0.0;
  if (params.p == 1.0) {
    s = u.cwiseAbs().sum();
  } else {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double a = std::abs(u[i]);
      if (a > 0.0) s += std::pow(a, params.p);
    }
  }
  if (s == 0.0) return 0.0;
  if (params.q == params.p) return s;
  return std::pow(s, params.q / params.p);
}

/// G_t(u) = phi . u + gamma_t * ||u||_p^q — the objective of the pointwise
/// minimizations below.
inline double pointwise_objective(const PointwiseProblem& prob, const Eigen::VectorXd& u,
                                  const PenaltyParams& params) {
  return prob.phi.dot(u) + prob.gamma_t * penalty_eval(u, params);
}

/// Exact integral of e^(-lambda t) over [t_k, t_k1].
inline double weight_bk(double lambda, double t_k, double t_k1) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("weight_bk: require lambda > 0");
  if (!(t_k < t_k1) || !std::isfinite(t_k) || !std::isfinite(t_k1))
    throw std::invalid_argument("weight_bk: require t_k < t_k1");
  // e^(-l a) - e^(-l b) = -e^(-l a) expm1(-l (b-a)), stable for short intervals
  return -std::exp(-lambda * t_k) * std::expm1(-lambda * (t_k1 - t_k)) / lambda;
}

/// Splits coordinates by comparing |phi_i| rho_i^(1-q) against gamma_t.
/// Membership in the measure-zero equality set uses a relative tolerance.
inline IndexClassification classify_indices(const PointwiseProblem& prob,
                                            const BoxConstraint& box, double q,
                                            double eps_cls = 1e-12) {
  prob.validate();
  box.validate();
  if (prob.phi.size() != box.rho.size())
    throw std::invalid_argument("classify_indices: phi/rho length mismatch");
  IndexClassification cls;
  cls.m = static_cast<int>(prob.phi.size());
  for (int i = 0; i < cls.m; ++i) {
    const double thr = std::abs(prob.phi[i]) * std::pow(box.rho[i], 1.0 - q);
    if (std::abs(thr - prob.gamma_t) <= eps_cls * std::max(thr, prob.gamma_t)) {
      cls.i_zero.push_back(i);
    } else if (thr < prob.gamma_t) {
      cls.i_minus.push_back(i);
    } else {
      cls.i_plus.push_back(i);
    }
  }
  return cls;
}

/// Minimizer and value of one pointwise problem.
struct PointwiseMinimum {
  Eigen::VectorXd u;
  double value = 0.0;
};

struct MinimizeOptions {
  int enumeration_cap = 20;  ///< max |I^+| enumerated (2^cap candidates)
  double eps_cls = 1e-12;
};

namespace detail {

inline int count_nonzero(const Eigen::VectorXd& u) {
  int n = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] != 0.0) ++n;
  return n;
}

inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

/// Deterministic candidate selection: lowest value, then fewest nonzero
/// coordinates, then lexicographically smallest vector.
struct BestCandidate {
  Eigen::VectorXd u;
  double value = std::numeric_limits<double>::infinity();
  int nnz = std::numeric_limits<int>::max();

  void offer(const Eigen::VectorXd& cand, double val) {
    if (val > value) return;
    if (val < value) {
      u = cand;
      value = val;
      nnz = count_nonzero(cand);
      return;
    }
    const int n = count_nonzero(cand);
    if (n < nnz || (n == nnz && lex_less(cand, u))) {
      u = cand;
      nnz = n;
    }
  }
};

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Global minimizer of G_t over the box, built from the structural result:
/// sub-threshold coordinates are forced to zero; above-threshold coordinates
/// take values in {0, -rho_i sgn(phi_i)} and are resolved by enumerating the
/// 2^|I^+| bang-off candidates. With no above-threshold coordinate, threshold
/// coordinates are tried as single bangs for q < 1 and resolved to 0 for
/// q = 1 (sparsest point of the optimal interval).
inline PointwiseMinimum minimize_box(const PointwiseProblem& prob, const BoxConstraint& box,
                                     const PenaltyParams& params,
                                     const MinimizeOptions& opts = {}) {
  prob.validate();
  box.validate();
  params.validate();
  if (prob.phi.size() != box.rho.size())
    throw std::invalid_argument("minimize_box: phi/rho length mismatch");

  const IndexClassification cls = classify_indices(prob, box, params.q, opts.eps_cls);
  const auto m = prob.phi.size();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);

  detail::BestCandidate best;
  best.offer(zero, 0.0);

  if (!cls.i_plus.empty()) {
    const int ell = static_cast<int>(cls.i_plus.size());
    if (ell > opts.enumeration_cap)
      throw CapacityError("minimize_box: |I^+| = " + std::to_string(ell) +
                          " exceeds the enumeration cap (" +
                          std::to_string(opts.enumeration_cap) +
                          "); use brute_force_min instead");
    Eigen::VectorXd cand = zero;
    const std::uint64_t subsets = std::uint64_t{1} << ell;
    for (std::uint64_t mask = 1; mask < subsets; ++mask) {
      cand.setZero();
      for (int b = 0; b < ell; ++b) {
        if (mask & (std::uint64_t{1} << b)) {
          const int i = cls.i_plus[static_cast<std::size_t>(b)];
          cand[i] = -box.rho[i] * detail::sgn(prob.phi[i]);
        }
      }
      best.offer(cand, pointwise_objective(prob, cand, params));
    }
  } else if (params.q < 1.0) {
    for (int j : cls.i_zero) {
      Eigen::VectorXd cand = zero;
      cand[j] = -box.rho[j] * detail::sgn(prob.phi[j]);
      if (cand[j] != 0.0) best.offer(cand, pointwise_objective(prob, cand, params));
    }
  }
  // q == 1 with empty I^+: the whole optimal interval scores 0; keep u = 0.

  return {best.u, best.value};
}

namespace detail {

constexpr std::int64_t kSamplingWorkCap = 30'000'000;

inline void check_sampling_work(int resolution, int m, const char* who) {
  const double points = std::pow(static_cast<double>(resolution), m);
  if (!(points <= static_cast<double>(kSamplingWorkCap)))
    throw CapacityError(std::string(who) + ": resolution^m exceeds the work cap");
}

/// Visits the product grid with `resolution` points per axis on
/// [-bound_i, bound_i]; axis 0 varies fastest and 0 is exact for odd counts.
template <typename Visit>
void scan_product_grid(const Eigen::VectorXd& bound, int resolution, Visit&& visit) {
  const int m = static_cast<int>(bound.size());
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd u(m);
  const double denom = static_cast<double>(resolution - 1);
  auto axis_value = [&](int dim, int j) {
    return bound[dim] * (2.0 * static_cast<double>(j) / denom - 1.0);
  };
  for (int d = 0; d < m; ++d) u[d] = axis_value(d, 0);
  while (true) {
    visit(u);
    int d = 0;
    while (d < m) {
      if (++idx[static_cast<std::size_t>(d)] < resolution) {
        u[d] = axis_value(d, idx[static_cast<std::size_t>(d)]);
        break;
      }
      idx[static_cast<std::size_t>(d)] = 0;
      u[d] = axis_value(d, 0);
      ++d;
    }
    if (d == m) break;
  }
}

}  // namespace detail

/// Exhaustive oracle: evaluates G_t on the product grid intersected with the
/// box. Resolution must be odd so sparse candidates (exact zeros) and the
/// bang values are grid points. Tie-break identical to minimize_box.
inline PointwiseMinimum brute_force_min(const PointwiseProblem& prob, const BoxConstraint& box,
                                        const PenaltyParams& params, int resolution) {
  prob.validate();
  box.validate();
  params.validate();
  if (prob.phi.size() != box.rho.size())
    throw std::invalid_argument("brute_force_min: phi/rho length mismatch");
  if (resolution < 3 || resolution % 2 == 0)
    throw std::invalid_argument("brute_force_min: resolution must be odd and >= 3");
  detail::check_sampling_work(resolution, static_cast<int>(prob.phi.size()), "brute_force_min");

  detail::BestCandidate best;
  detail::scan_product_grid(box.rho, resolution, [&](const Eigen::VectorXd& u) {
    best.offer(u, pointwise_objective(prob, u, params));
  });
  return {best.u, best.value};
}

/// Ball variant of the exhaustive oracle: product grid filtered to the ball.
inline PointwiseMinimum brute_force_min(const PointwiseProblem& prob, const BallConstraint& ball,
                                        const PenaltyParams& params, int resolution) {
  prob.validate();
  ball.validate();
  params.validate();
  if (prob.phi.size() != ball.m)
    throw std::invalid_argument("brute_force_min: phi/ball dimension mismatch");
  if (resolution < 3 || resolution % 2 == 0)
    throw std::invalid_argument("brute_force_min: resolution must be odd and >= 3");
  detail::check_sampling_work(resolution, ball.m, "brute_force_min");

  const double r2 = ball.rho * ball.rho;
  detail::BestCandidate best;
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(ball.m, ball.rho);
  detail::scan_product_grid(bound, resolution, [&](const Eigen::VectorXd& u) {
    if (u.squaredNorm() <= r2) best.offer(u, pointwise_objective(prob, u, params));
  });
  return {best.u, best.value};
}

/// Sampling minimizer of G_t over the Euclidean ball: product-grid points
/// inside the ball plus the radial projection of every nonzero grid point
/// onto the sphere (no closed-form structure is available; when two or more
/// coordinates are above threshold the minimum is known to sit on the
/// sphere, which the projected candidates hit exactly).
inline PointwiseMinimum minimize_ball(const PointwiseProblem& prob, const BallConstraint& ball,
                                      const PenaltyParams& params, int resolution) {
  prob.validate();
  ball.validate();
  params.validate();
  if (prob.phi.size() != ball.m)
    throw std::invalid_argument("minimize_ball: phi/ball dimension mismatch");
  if (resolution < 2) throw std::invalid_argument("minimize_ball: resolution must be >= 2");
  detail::check_sampling_work(resolution, ball.m, "minimize_ball");

  const double r2 = ball.rho * ball.rho;
  detail::BestCandidate best;
  best.offer(Eigen::VectorXd::Zero(ball.m), 0.0);
  for (int i = 0; i < ball.m; ++i) {
    for (double s : {-1.0, 1.0}) {
      Eigen::VectorXd cand = Eigen::VectorXd::Zero(ball.m);
      cand[i] = s * ball.rho;
      best.offer(cand, pointwise_objective(prob, cand, params));
    }
  }
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(ball.m, ball.rho);
  Eigen::VectorXd proj(ball.m);
  detail::scan_product_grid(bound, resolution, [&](const Eigen::VectorXd& u) {
    const double n2 = u.squaredNorm();
    if (n2 == 0.0) return;
    if (n2 <= r2) best.offer(u, pointwise_objective(prob, u, params));
    proj = u * (ball.rho / std::sqrt(n2));
    best.offer(proj, pointwise_objective(prob, proj, params));
  });
  return {best.u, best.value};
}

}  // namespace sparseoc
