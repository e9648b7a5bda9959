#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fracprodi/error.hpp"

namespace fracprodi {

/// Spatial point; the second coordinate is ignored on 1D grids.
using Point = std::array<double, 2>;

struct Interval {
  double a;
  double b;
};

struct Ball {
  Point center;
  double radius;
};

/// Bounded domain: an open interval or an open disc in the plane.
class Domain {
 public:
  static Domain interval(double a, double b) {
    if (!(a < b)) throw Error(ErrorCode::invalid_bounds, "interval requires a < b");
    return Domain(Interval{a, b});
  }

  static Domain ball(Point center, double radius) {
    if (!(radius > 0.0)) throw Error(ErrorCode::invalid_bounds, "ball requires radius > 0");
    return Domain(Ball{center, radius});
  }

  bool is_interval() const { return std::holds_alternative<Interval>(shape_); }
  const Interval& as_interval() const { return std::get<Interval>(shape_); }
  const Ball& as_ball() const { return std::get<Ball>(shape_); }
  int dim() const { return is_interval() ? 1 : 2; }

  bool contains(const Point& p) const {
    if (is_interval()) {
      const auto& iv = as_interval();
      return p[0] > iv.a && p[0] < iv.b;
    }
    const auto& bl = as_ball();
    const double dx = p[0] - bl.center[0];
    const double dy = p[1] - bl.center[1];
    return dx * dx + dy * dy < bl.radius * bl.radius;
  }

  /// Exact distance to the boundary for points inside the domain.
  double distance_to_boundary(const Point& p) const {
    if (is_interval()) {
      const auto& iv = as_interval();
      return std::min(p[0] - iv.a, iv.b - p[0]);
    }
    const auto& bl = as_ball();
    return bl.radius - std::hypot(p[0] - bl.center[0], p[1] - bl.center[1]);
  }

  /// True when this domain's closure lies in the interior of `outer`.
  bool strictly_inside(const Domain& outer) const {
    if (is_interval() && outer.is_interval()) {
      return outer.as_interval().a < as_interval().a && as_interval().b < outer.as_interval().b;
    }
    if (!is_interval() && !outer.is_interval()) {
      const auto& in = as_ball();
      const auto& out = outer.as_ball();
      const double offset = std::hypot(in.center[0] - out.center[0], in.center[1] - out.center[1]);
      return offset + in.radius < out.radius;
    }
    return false;
  }

  bool operator==(const Domain& other) const {
    if (is_interval() != other.is_interval()) return false;
    if (is_interval()) {
      return as_interval().a == other.as_interval().a && as_interval().b == other.as_interval().b;
    }
    return as_ball().center == other.as_ball().center && as_ball().radius == other.as_ball().radius;
  }

 private:
  explicit Domain(std::variant<Interval, Ball> shape) : shape_(shape) {}
  std::variant<Interval, Ball> shape_;
};

/// Uniform discretization of a Domain. Only interior lattice points are
/// stored; boundary and exterior values are implicitly zero.
class Grid {
 public:
  const Domain& domain() const { return domain_; }
  double spacing() const { return spacing_; }
  int dim() const { return domain_.dim(); }
  std::size_t size() const { return nodes_.size(); }
  const Point& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<Point>& nodes() const { return nodes_; }

  /// Lattice points per axis (ball grids) or node count (interval grids).
  int per_axis() const { return per_axis_; }

  /// Integer lattice coordinates of node i (ball grids only).
  const std::array<int, 2>& lattice_index(std::size_t i) const { return lattice_of_node_.at(i); }

  double distance_to_boundary(std::size_t i) const { return domain_.distance_to_boundary(node(i)); }

  /// Lattice origin: coordinates of lattice index (0, 0).
  const Point& origin() const { return origin_; }

  /// Node index at lattice coordinate (i, j), or -1 when that lattice point is not interior.
  int node_at(int i, int j) const {
    if (dim() == 1) return (j == 0 && i >= 0 && i < per_axis_) ? i : -1;
    if (i < 0 || j < 0 || i >= per_axis_ || j >= per_axis_) return -1;
    return node_of_lattice_[static_cast<std::size_t>(i) * per_axis_ + j];
  }

  /// Index of the interior node nearest to p.
  std::size_t nearest_node(const Point& p) const {
    if (dim() == 1) {
      const double k = std::round((p[0] - origin_[0]) / spacing_);
      return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(per_axis_ - 1)));
    }
    const auto clamp_axis = [&](double c, double o) {
      return static_cast<int>(std::clamp(std::round((c - o) / spacing_), 0.0, static_cast<double>(per_axis_ - 1)));
    };
    const int i = clamp_axis(p[0], origin_[0]);
    const int j = clamp_axis(p[1], origin_[1]);
    return static_cast<std::size_t>(nearest_of_lattice_[static_cast<std::size_t>(i) * per_axis_ + j]);
  }

  friend std::shared_ptr<const Grid> make_interval_grid(double a, double b, int n);
  friend std::shared_ptr<const Grid> make_ball_grid(double radius, int m, Point center);

 private:
  Grid(Domain domain, double spacing) : domain_(domain), spacing_(spacing) {}

  Domain domain_;
  double spacing_;
  int per_axis_ = 0;
  Point origin_{0.0, 0.0};
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> lattice_of_node_;
  std::vector<int> node_of_lattice_;
  std::vector<int> nearest_of_lattice_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// n interior nodes x_i = a + i h, h = (b - a)/(n + 1).
inline GridPtr make_interval_grid(double a, double b, int n) {
  if (!(a < b)) throw Error(ErrorCode::invalid_bounds, "interval grid requires a < b");
  if (n < 3) throw Error(ErrorCode::too_few_nodes, "interval grid requires n >= 3");
  const double h = (b - a) / (n + 1);
  auto grid = std::shared_ptr<Grid>(new Grid(Domain::interval(a, b), h));
  grid->per_axis_ = n;
  grid->origin_ = {a + h, 0.0};
  grid->nodes_.reserve(n);
  grid->lattice_of_node_.reserve(n);
  for (int i = 1; i <= n; ++i) {
    grid->nodes_.push_back({a + i * h, 0.0});
    grid->lattice_of_node_.push_back({i - 1, 0});
  }
  return grid;
}

/// m x m lattice of spacing 2r/(m + 1) centred on the disc, clipped to |x - c| < r.
inline GridPtr make_ball_grid(double radius, int m, Point center = {0.0, 0.0}) {
  if (!(radius > 0.0)) throw Error(ErrorCode::too_few_nodes, "ball grid requires radius > 0");
  if (m < 5) throw Error(ErrorCode::too_few_nodes, "ball grid requires m >= 5 nodes per axis");
  const double h = 2.0 * radius / (m + 1);
  auto grid = std::shared_ptr<Grid>(new Grid(Domain::ball(center, radius), h));
  grid->per_axis_ = m;
  grid->origin_ = {center[0] - radius + h, center[1] - radius + h};
  grid->node_of_lattice_.assign(static_cast<std::size_t>(m) * m, -1);
  // Offsets from the centre are (2i - (m-1)) h/2 and the radius is (m+1) h/2,
  // so membership is decided in exact integer arithmetic.
  const auto offset = [m](int i) { return 2L * i - (m - 1); };
  const long r2 = static_cast<long>(m + 1) * (m + 1);
  // i outer, j inner: lexicographic order in (x, y).
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (offset(i) * offset(i) + offset(j) * offset(j) >= r2) continue;
      const Point p{center[0] + 0.5 * offset(i) * h, center[1] + 0.5 * offset(j) * h};
      grid->node_of_lattice_[static_cast<std::size_t>(i) * m + j] = static_cast<int>(grid->nodes_.size());
      grid->nodes_.push_back(p);
      grid->lattice_of_node_.push_back({i, j});
    }
  }
  if (grid->nodes_.size() < 3) throw Error(ErrorCode::too_few_nodes, "ball grid has fewer than 3 interior nodes");

  grid->nearest_of_lattice_ = grid->node_of_lattice_;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      int& slot = grid->nearest_of_lattice_[static_cast<std::size_t>(i) * m + j];
      if (slot >= 0) continue;
      long best = std::numeric_limits<long>::max();
      for (std::size_t k = 0; k < grid->nodes_.size(); ++k) {
        const long di = grid->lattice_of_node_[k][0] - i;
        const long dj = grid->lattice_of_node_[k][1] - j;
        const long d2 = di * di + dj * dj;
        if (d2 < best) {
          best = d2;
          slot = static_cast<int>(k);
        }
      }
    }
  }
  return grid;
}

/// Real values on the interior nodes of a grid; zero everywhere else.
class GridFn {
 public:
  GridFn() = default;
  explicit GridFn(GridPtr grid) : grid_(std::move(grid)), values_(Eigen::VectorXd::Zero(grid_->size())) {}
  GridFn(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
      throw Error(ErrorCode::grid_mismatch, "value count does not match node count");
    }
  }

  static GridFn constant(GridPtr grid, double c) {
    const auto n = static_cast<Eigen::Index>(grid->size());
    return GridFn(std::move(grid), Eigen::VectorXd::Constant(n, c));
  }

  template <typename F>
  static GridFn from_function(GridPtr grid, F&& f) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
    for (std::size_t i = 0; i < grid->size(); ++i) v[static_cast<Eigen::Index>(i)] = f(grid->node(i));
    return GridFn(std::move(grid), std::move(v));
  }

  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

  double sup_norm() const { return values_.size() == 0 ? 0.0 : values_.cwiseAbs().maxCoeff(); }
  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }

  /// Largest value of the negative part u^- = max(-u, 0).
  double sup_negative_part() const { return std::max(0.0, -values_.minCoeff()); }
  double sup_positive_part() const { return std::max(0.0, values_.maxCoeff()); }

  /// Value at the node nearest to p, or 0 when p is outside the domain.
  double nearest(const Point& p) const {
    if (!grid_->domain().contains(p)) return 0.0;
    return values_[static_cast<Eigen::Index>(grid_->nearest_node(p))];
  }

  /// Piecewise (bi)linear interpolation of the zero-extended function.
  double interpolate(const Point& p) const {
    if (!grid_->domain().contains(p)) return 0.0;
    const double h = grid_->spacing();
    const auto& o = grid_->origin();
    const auto value_at = [&](int i, int j) {
      const int k = grid_->node_at(i, j);
      return k < 0 ? 0.0 : values_[k];
    };
    const double fx = (p[0] - o[0]) / h;
    const int i0 = static_cast<int>(std::floor(fx));
    const double tx = fx - i0;
    if (grid_->dim() == 1) return (1.0 - tx) * value_at(i0, 0) + tx * value_at(i0 + 1, 0);
    const double fy = (p[1] - o[1]) / h;
    const int j0 = static_cast<int>(std::floor(fy));
    const double ty = fy - j0;
    return (1.0 - tx) * (1.0 - ty) * value_at(i0, j0) + tx * (1.0 - ty) * value_at(i0 + 1, j0) +
           (1.0 - tx) * ty * value_at(i0, j0 + 1) + tx * ty * value_at(i0 + 1, j0 + 1);
  }

  GridFn& operator+=(const GridFn& o) {
    check_same(o);
    values_ += o.values_;
    return *this;
  }
  GridFn& operator-=(const GridFn& o) {
    check_same(o);
    values_ -= o.values_;
    return *this;
  }
  GridFn& operator*=(double c) {
    values_ *= c;
    return *this;
  }

  friend GridFn operator+(GridFn a, const GridFn& b) { return a += b; }
  friend GridFn operator-(GridFn a, const GridFn& b) { return a -= b; }
  friend GridFn operator*(double c, GridFn a) { return a *= c; }
  friend GridFn operator*(GridFn a, double c) { return a *= c; }
  friend GridFn operator-(GridFn a) { return a *= -1.0; }

  friend GridFn min(const GridFn& a, const GridFn& b) {
    a.check_same(b);
    return GridFn(a.grid_, a.values_.cwiseMin(b.values_));
  }
  friend GridFn max(const GridFn& a, const GridFn& b) {
    a.check_same(b);
    return GridFn(a.grid_, a.values_.cwiseMax(b.values_));
  }

  void check_same(const GridFn& o) const {
    if (grid_ == o.grid_) return;
    if (grid_ == nullptr || o.grid_ == nullptr || grid_->nodes() != o.grid_->nodes()) {
      throw Error(ErrorCode::grid_mismatch, "grid functions live on different grids");
    }
  }

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

/// u(x)/d(x)^s node by node.
inline GridFn boundary_ratio(const GridFn& u, double s) {
  GridFn out(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = u[i] / std::pow(u.grid()->distance_to_boundary(i), s);
  }
  return out;
}

/// CSV with header `x[,y],value`, 17 significant digits. Preamble lines are
/// written first, each prefixed with "# ".
inline void write_csv(std::ostream& os, const GridFn& u, const std::vector<std::string>& preamble = {}) {
  for (const auto& line : preamble) os << "# " << line << '\n';
  const bool two_d = u.grid()->dim() == 2;
  os << (two_d ? "x,y,value\n" : "x,value\n");
  os << std::setprecision(17);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& p = u.grid()->node(i);
    os << p[0] << ',';
    if (two_d) os << p[1] << ',';
    os << u[i] << '\n';
  }
}

/// Reads values written by write_csv back onto `grid`; coordinates must match the nodes.
inline GridFn read_csv(std::istream& is, const GridPtr& grid) {
  std::string line;
  GridFn u(grid);
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    if (row >= grid->size()) throw Error(ErrorCode::grid_mismatch, "too many CSV rows");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != static_cast<std::size_t>(grid->dim()) + 1) {
      throw Error(ErrorCode::parse_error, "unexpected CSV column count");
    }
    const auto& p = grid->node(row);
    if (cells[0] != p[0] || (grid->dim() == 2 && cells[1] != p[1])) {
      throw Error(ErrorCode::grid_mismatch, "CSV coordinates do not match grid nodes");
    }
    u[row++] = cells.back();
  }
  if (row != grid->size()) throw Error(ErrorCode::grid_mismatch, "too few CSV rows");
  return u;
}

}  // namespace fracprodi
