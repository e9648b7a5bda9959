#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fracprodi/error.hpp"
#include "fracprodi/fraclap.hpp"
#include "fracprodi/grid.hpp"
#include "fracprodi/spectral.hpp"

namespace fracprodi {

/// Factorized A + diag(V) for repeated solves. Assumes lambda*(A + V) > 0,
/// which makes the matrix symmetric positive definite.
class DirichletSolver {
 public:
  DirichletSolver(const DiscreteOp& op, const PotentialFn& V) : grid_(op.grid), matrix_(with_potential(op, V)) {
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success) throw Error(ErrorCode::singular_system, "Cholesky factorization failed");
  }

  /// Solve with one step of iterative refinement.
  GridFn solve(const GridFn& g) const {
    Eigen::VectorXd u = llt_.solve(g.values());
    const Eigen::VectorXd r = g.values() - matrix_ * u;
    u += llt_.solve(r);
    return GridFn(grid_, std::move(u));
  }

  double residual(const GridFn& u, const GridFn& g) const {
    return (matrix_ * u.values() - g.values()).cwiseAbs().maxCoeff();
  }

  const Eigen::MatrixXd& matrix() const { return matrix_; }

  Eigen::MatrixXd inverse() const {
    const auto n = matrix_.rows();
    return llt_.solve(Eigen::MatrixXd::Identity(n, n));
  }

 private:
  GridPtr grid_;
  Eigen::MatrixXd matrix_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline void require_positive_eigenvalue(const DiscreteOp& op, const PotentialFn& V) {
  const double lambda = principal_eigenpair(op, V).lambda_star;
  if (!(lambda > 0.0)) {
    throw Error(ErrorCode::eigenvalue_precondition_failed,
                "principal eigenvalue " + std::to_string(lambda) + " is not positive");
  }
}

/// Unique solution of (A + diag V) u = g with zero exterior values.
inline GridFn solve_dirichlet(const DiscreteOp& op, const PotentialFn& V, const GridFn& g) {
  require_positive_eigenvalue(op, V);
  const DirichletSolver solver(op, V);
  GridFn u = solver.solve(g);
  if (solver.residual(u, g) > 1e-10 * (1.0 + g.sup_norm())) {
    throw Error(ErrorCode::singular_system, "linear solve residual above tolerance");
  }
  return u;
}

struct ComparisonReport {
  bool holds = false;
  double worst_violation = 0.0;  ///< max_i (u_sub - v_super)_i; <= 0 when the ordering holds
  std::size_t worst_node = 0;
};

/// Discrete weak maximum principle check: given (A+V)u_sub <= 0 <= (A+V)v_super
/// (to 1e-9) and equal zero exterior data, reports whether u_sub <= v_super.
inline ComparisonReport check_comparison(const DiscreteOp& op, const PotentialFn& V, const GridFn& u_sub,
                                         const GridFn& v_super, double tol = 1e-9) {
  u_sub.check_same(v_super);
  require_positive_eigenvalue(op, V);
  const Eigen::MatrixXd AV = with_potential(op, V);
  const Eigen::VectorXd lu = AV * u_sub.values();
  const Eigen::VectorXd lv = AV * v_super.values();
  for (Eigen::Index i = 0; i < lu.size(); ++i) {
    if (lu[i] > tol) {
      throw Error(ErrorCode::precondition_not_met, "subsolution inequality fails at node " + std::to_string(i));
    }
    if (lv[i] < -tol) {
      throw Error(ErrorCode::precondition_not_met, "supersolution inequality fails at node " + std::to_string(i));
    }
  }
  ComparisonReport r;
  Eigen::Index worst = 0;
  r.worst_violation = (u_sub.values() - v_super.values()).maxCoeff(&worst);
  r.worst_node = static_cast<std::size_t>(worst);
  r.holds = r.worst_violation <= tol;
  return r;
}

/// Infinity norm of (A + diag V)^{-1}: sup|u| <= kappa sup|g| for every right-hand side.
inline double abp_bound(const DiscreteOp& op, const PotentialFn& V) {
  require_positive_eigenvalue(op, V);
  return DirichletSolver(op, V).inverse().cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace fracprodi
