#pragma once

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "fracprodi/error.hpp"
#include "fracprodi/grid.hpp"

namespace fracprodi {

inline void require_order(double s) {
  if (!(s > 0.0 && s < 1.0)) throw Error(ErrorCode::out_of_range, "order s must lie in (0, 1)");
}

/// C(d, s) = 4^s Gamma(d/2 + s) / (pi^{d/2} |Gamma(-s)|), the constant in front
/// of the singular-integral form of the fractional Laplacian.
inline double normalizing_constant(int d, double s) {
  require_order(s);
  if (d != 1 && d != 2) throw Error(ErrorCode::out_of_range, "dimension must be 1 or 2");
  const double half_d = 0.5 * d;
  return std::pow(4.0, s) * std::tgamma(half_d + s) /
         (std::pow(std::numbers::pi, half_d) * std::abs(std::tgamma(-s)));
}

/// Fractional centred-difference weights g_0..g_K.
inline std::vector<double> fcd_weights(double s, int K) {
  if (K < 1) throw Error(ErrorCode::out_of_range, "truncation length must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(K) + 1);
  g[0] = std::tgamma(2.0 * s + 1.0) / std::pow(std::tgamma(s + 1.0), 2);
  for (int k = 0; k < K; ++k) g[k + 1] = g[k] * (k - s) / (k + s + 1.0);
  return g;
}

/// Dense symmetric matrix of (-Delta)^s on the interior nodes of a grid with
/// the zero exterior condition built in.
struct DiscreteOp {
  GridPtr grid;
  double s = 0.5;
  double norm_const = 0.0;
  Eigen::MatrixXd matrix;

  std::size_t size() const { return grid->size(); }

  Eigen::VectorXd row_sums() const { return matrix.rowwise().sum(); }
};

/// Toeplitz FCD assembly: A_ij = h^{-2s} g_{|i-j|}. Exterior nodes carry u = 0
/// and therefore drop out of every row.
inline DiscreteOp assemble_1d(const GridPtr& grid, double s) {
  require_order(s);
  if (grid->dim() != 1) throw Error(ErrorCode::grid_mismatch, "assemble_1d needs an interval grid");
  const auto n = static_cast<Eigen::Index>(grid->size());
  const auto g = fcd_weights(s, static_cast<int>(std::max<Eigen::Index>(n - 1, 1)));
  const double scale = std::pow(grid->spacing(), -2.0 * s);
  DiscreteOp op{grid, s, normalizing_constant(1, s), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) op.matrix(i, j) = scale * g[static_cast<std::size_t>(std::abs(i - j))];
  }
  return op;
}

namespace detail {

/// sum over k in Z^2 \ {0} of |k|^{-2-2s}: direct sum over |k| <= window plus
/// the integral of the tail outside the disc whose area matches the counted points.
inline double lattice_zeta_2d(double s, int window = 600) {
  const long w2 = static_cast<long>(window) * window;
  double sum = 0.0;
  long count = 1;  // origin
  for (int i = -window; i <= window; ++i) {
    for (int j = -window; j <= window; ++j) {
      const long r2 = static_cast<long>(i) * i + static_cast<long>(j) * j;
      if (r2 == 0 || r2 > w2) continue;
      sum += std::pow(static_cast<double>(r2), -(1.0 + s));
      ++count;
    }
  }
  const double r_eff = std::sqrt(static_cast<double>(count) / std::numbers::pi);
  return sum + std::numbers::pi * std::pow(r_eff, -2.0 * s) / s;
}

}  // namespace detail

/// Direct lattice quadrature of the principal-value integral on a ball grid.
/// A_ij = -C h^{-2s} |k_i - k_j|^{-2-2s} for i != j, and the diagonal collects
/// the whole infinite lattice sum (the exterior carries zero values).
inline DiscreteOp assemble_2d(const GridPtr& grid, double s) {
  require_order(s);
  if (grid->dim() != 2) throw Error(ErrorCode::grid_mismatch, "assemble_2d needs a ball grid");
  const auto n = static_cast<Eigen::Index>(grid->size());
  const double c = normalizing_constant(2, s);
  const double scale = c * std::pow(grid->spacing(), -2.0 * s);
  const int m = grid->per_axis();

  std::vector<double> kernel(2 * static_cast<std::size_t>(m) * m + 1, 0.0);
  for (std::size_t r2 = 1; r2 < kernel.size(); ++r2) kernel[r2] = std::pow(static_cast<double>(r2), -(1.0 + s));

  DiscreteOp op{grid, s, c, Eigen::MatrixXd(n, n)};
  const double diagonal = scale * detail::lattice_zeta_2d(s);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ki = grid->lattice_index(static_cast<std::size_t>(i));
    op.matrix(i, i) = diagonal;
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto& kj = grid->lattice_index(static_cast<std::size_t>(j));
      const long di = ki[0] - kj[0];
      const long dj = ki[1] - kj[1];
      const double a = -scale * kernel[static_cast<std::size_t>(di * di + dj * dj)];
      op.matrix(i, j) = a;
      op.matrix(j, i) = a;
    }
  }
  return op;
}

/// Dispatches on the grid dimension.
inline DiscreteOp assemble(const GridPtr& grid, double s) {
  return grid->dim() == 1 ? assemble_1d(grid, s) : assemble_2d(grid, s);
}

inline GridFn apply(const DiscreteOp& op, const GridFn& u) {
  if (u.grid() != op.grid && (u.grid() == nullptr || u.grid()->nodes() != op.grid->nodes())) {
    throw Error(ErrorCode::grid_mismatch, "grid function does not live on the operator's grid");
  }
  return GridFn(op.grid, op.matrix * u.values());
}

/// Row-major CSV dump of the matrix entries.
inline void write_matrix_csv(std::ostream& os, const DiscreteOp& op) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < op.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < op.matrix.cols(); ++j) {
      if (j) os << ',';
      os << op.matrix(i, j);
    }
    os << '\n';
  }
}

}  // namespace fracprodi
