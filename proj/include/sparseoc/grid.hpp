#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sparseoc/errors.hpp"

namespace sparseoc {

/// Uniform Cartesian grid over a hyperrectangle. Node 0 is the lower corner
/// and dimension 0 varies fastest in the flat ordering.
class RegularGrid {
 public:
  static constexpr std::int64_t kDefaultNodeCap = std::int64_t{1} << 22;
  static constexpr int kMaxDim = 8;

  RegularGrid() = default;

  RegularGrid(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> nodes_per_dim,
              std::int64_t node_cap = kDefaultNodeCap)
      : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes_per_dim)) {
    const auto d = lower_.size();
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("RegularGrid: dimension out of range");
    if (upper_.size() != d || static_cast<Eigen::Index>(nodes_.size()) != d)
      throw std::invalid_argument("RegularGrid: bound/node count size mismatch");
    spacing_.resize(d);
    num_nodes_ = 1;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(lower_[i] < upper_[i]) || !std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
        throw std::invalid_argument("RegularGrid: require lower_i < upper_i");
      if (nodes_[static_cast<std::size_t>(i)] < 2)
        throw std::invalid_argument("RegularGrid: require >= 2 nodes per dimension");
      spacing_[i] = (upper_[i] - lower_[i]) / (nodes_[static_cast<std::size_t>(i)] - 1);
      strides_.push_back(num_nodes_);
      num_nodes_ *= nodes_[static_cast<std::size_t>(i)];
      if (num_nodes_ > node_cap)
        throw CapacityError("RegularGrid: " + std::to_string(num_nodes_) +
                            " nodes exceed the memory cap (" + std::to_string(node_cap) + ")");
    }
  }

  int dim() const { return static_cast<int>(lower_.size()); }
  std::int64_t num_nodes() const { return num_nodes_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::VectorXd& spacing() const { return spacing_; }
  const std::vector<int>& nodes_per_dim() const { return nodes_; }
  double min_spacing() const { return spacing_.minCoeff(); }

  Eigen::VectorXd coords(std::int64_t flat) const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i < dim(); ++i) {
      const auto n = static_cast<std::int64_t>(nodes_[static_cast<std::size_t>(i)]);
      const std::int64_t idx = flat % n;
      flat /= n;
      x[i] = lower_[i] + static_cast<double>(idx) * spacing_[i];
    }
    return x;
  }

  std::int64_t flat_index(const std::vector<int>& multi) const {
    std::int64_t flat = 0;
    for (int i = 0; i < dim(); ++i)
      flat += static_cast<std::int64_t>(multi[static_cast<std::size_t>(i)]) * strides_[static_cast<std::size_t>(i)];
    return flat;
  }

 private:
  Eigen::VectorXd lower_, upper_, spacing_;
  std::vector<int> nodes_;
  std::vector<std::int64_t> strides_;
  std::int64_t num_nodes_ = 0;
};

/// Componentwise clamp onto the grid domain; identity on interior points.
inline Eigen::VectorXd project_to_domain(const Eigen::VectorXd& x, const RegularGrid& grid) {
  return x.cwiseMax(grid.lower()).cwiseMin(grid.upper());
}

/// One scalar per node (value functions).
struct ScalarField {
  RegularGrid grid;
  Eigen::VectorXd values;

  static ScalarField zeros(const RegularGrid& g) {
    return {g, Eigen::VectorXd::Zero(g.num_nodes())};
  }
};

/// One control vector per node, stored column-per-node (feedback laws).
struct VectorField {
  RegularGrid grid;
  Eigen::MatrixXd values;  // control_dim x num_nodes
};

namespace detail {

/// Corner indices and multilinear weights for a (clamped) query point.
/// Weights are nonnegative and sum to one; barycentric coordinates within
/// 1e-13 of a node snap onto it so node queries reproduce stored values
/// exactly.
struct InterpStencil {
  std::array<std::int64_t, 1 << RegularGrid::kMaxDim> index;
  std::array<double, 1 << RegularGrid::kMaxDim> weight;
  int count = 0;
};

inline void interp_stencil(const RegularGrid& grid, const Eigen::VectorXd& x_in,
                           InterpStencil& out) {
  const int d = grid.dim();
  std::array<std::int64_t, RegularGrid::kMaxDim> base{};
  std::array<double, RegularGrid::kMaxDim> theta{};
  for (int i = 0; i < d; ++i) {
    const double xi =
        std::min(std::max(x_in[i], grid.lower()[i]), grid.upper()[i]);
    const int n = grid.nodes_per_dim()[static_cast<std::size_t>(i)];
    double s = (xi - grid.lower()[i]) / grid.spacing()[i];
    auto cell = static_cast<std::int64_t>(std::floor(s));
    if (cell < 0) cell = 0;
    if (cell > n - 2) cell = n - 2;
    double t = s - static_cast<double>(cell);
    if (t < 1e-13) t = 0.0;
    if (t > 1.0 - 1e-13) t = 1.0;
    base[static_cast<std::size_t>(i)] = cell;
    theta[static_cast<std::size_t>(i)] = t;
  }
  const int corners = 1 << d;
  out.count = corners;
  for (int c = 0; c < corners; ++c) {
    std::int64_t flat = 0;
    double w = 1.0;
    std::int64_t stride = 1;
    for (int i = 0; i < d; ++i) {
      const bool hi = (c >> i) & 1;
      flat += (base[static_cast<std::size_t>(i)] + (hi ? 1 : 0)) * stride;
      stride *= grid.nodes_per_dim()[static_cast<std::size_t>(i)];
      w *= hi ? theta[static_cast<std::size_t>(i)] : 1.0 - theta[static_cast<std::size_t>(i)];
    }
    out.index[static_cast<std::size_t>(c)] = flat;
    out.weight[static_cast<std::size_t>(c)] = w;
  }
}

}  // namespace detail

/// Multilinear interpolation; the query point is clamped to the domain first,
/// so the map is total and bounded by the surrounding corner values.
inline double interpolate(const ScalarField& field, const Eigen::VectorXd& x) {
  detail::InterpStencil st;
  detail::interp_stencil(field.grid, x, st);
  double v = 0.0;
  for (int c = 0; c < st.count; ++c)
    v += st.weight[static_cast<std::size_t>(c)] * field.values[st.index[static_cast<std::size_t>(c)]];
  return v;
}

/// Visits every node as (flat index, coordinates), dimension 0 fastest.
template <typename Fn>
void for_each_node(const RegularGrid& grid, Fn&& fn) {
  for (std::int64_t flat = 0; flat < grid.num_nodes(); ++flat) fn(flat, grid.coords(flat));
}

}  // namespace sparseoc
