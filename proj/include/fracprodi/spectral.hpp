#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fracprodi/error.hpp"
#include "fracprodi/fraclap.hpp"
#include "fracprodi/grid.hpp"

namespace fracprodi {

/// Node values of a potential V (also used for V1, V2).
using PotentialFn = GridFn;

/// Principal Dirichlet eigenpair of (-Delta)^s + V.
struct EigenPair {
  double lambda_star = 0.0;
  GridFn psi;  ///< strictly positive, sup-norm 1
  double residual = 0.0;  ///< sup |(A + V) psi - lambda psi|
  int iterations = 0;
};

struct SpectralOptions {
  double tol = 1e-10;
  int max_iter = 10'000;
  double residual_target = 1e-9;
  std::optional<Eigen::VectorXd> start;
};

inline Eigen::MatrixXd with_potential(const DiscreteOp& op, const PotentialFn& V) {
  Eigen::MatrixXd m = op.matrix;
  m.diagonal() += V.values();
  return m;
}

/// Shifted inverse power iteration on A + diag(V) + sigma I with
/// sigma = max(0, -min V) + 1, which is positive definite.
inline EigenPair principal_eigenpair(const DiscreteOp& op, const PotentialFn& V, const SpectralOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::out_of_range, "eigen tolerance must be positive");
  if (V.size() != op.size()) throw Error(ErrorCode::grid_mismatch, "potential size does not match operator");
  const auto n = static_cast<Eigen::Index>(op.size());
  const double sigma = std::max(0.0, -V.min()) + 1.0;

  const Eigen::MatrixXd AV = with_potential(op, V);
  Eigen::MatrixXd shifted = AV;
  shifted.diagonal().array() += sigma;
  const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::singular_system, "shifted operator is not positive definite");

  Eigen::VectorXd x = opts.start ? *opts.start : Eigen::VectorXd::Ones(n);
  if (x.size() != n) throw Error(ErrorCode::grid_mismatch, "start vector size does not match operator");
  x /= x.cwiseAbs().maxCoeff();

  double lambda = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd y = llt.solve(x);
    // B y = x, so the Rayleigh quotient of B at y is x.y / y.y.
    const double mu = x.dot(y) / y.squaredNorm();
    Eigen::Index imax = 0;
    y.cwiseAbs().maxCoeff(&imax);
    x = y / y[imax];
    const double next = mu - sigma;
    const bool settled = std::abs(next - lambda) <= opts.tol;
    lambda = next;
    if (!settled) continue;

    const Eigen::VectorXd ax = AV * x;
    const double rq = x.dot(ax) / x.squaredNorm();
    const double residual = (ax - rq * x).cwiseAbs().maxCoeff();
    if (residual > opts.residual_target && it < opts.max_iter) continue;

    if ((x.array() <= 0.0).any()) {
      throw Error(ErrorCode::positivity_violation, "principal eigenvector changed sign");
    }
    return EigenPair{rq, GridFn(op.grid, x), residual, it};
  }
  throw Error(ErrorCode::no_convergence, "inverse power iteration did not converge");
}

inline EigenPair principal_eigenpair(const DiscreteOp& op) {
  return principal_eigenpair(op, PotentialFn(op.grid));
}

struct SpectralGap {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double gap() const { return lambda2 - lambda1; }
};

/// Two lowest eigenvalues of A + diag(V) by 2-vector block inverse iteration
/// with Rayleigh-Ritz on the block.
inline SpectralGap spectral_gap(const DiscreteOp& op, const PotentialFn& V, double tol = 1e-10, int max_iter = 10'000) {
  const auto n = static_cast<Eigen::Index>(op.size());
  const double sigma = std::max(0.0, -V.min()) + 1.0;
  const Eigen::MatrixXd AV = with_potential(op, V);
  Eigen::MatrixXd shifted = AV;
  shifted.diagonal().array() += sigma;
  const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::singular_system, "shifted operator is not positive definite");

  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd X(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = unif(rng);
  }
  SpectralGap prev{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd Y = llt.solve(X);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
    const Eigen::Matrix2d H = Q.transpose() * AV * Q;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
    X = Q * es.eigenvectors();
    const SpectralGap cur{es.eigenvalues()[0], es.eigenvalues()[1]};
    if (std::abs(cur.lambda1 - prev.lambda1) <= tol && std::abs(cur.lambda2 - prev.lambda2) <= tol) return cur;
    prev = cur;
  }
  throw Error(ErrorCode::no_convergence, "block inverse iteration did not converge");
}

struct EigenMonotonicityReport {
  double lambda_V = 0.0;
  double lambda_V_tilde = 0.0;
  bool strict = false;
};

/// Compares lambda*(A + V) with lambda*(A + V~) for V~ >= V, V~ != V.
inline EigenMonotonicityReport eigen_monotonicity_report(const DiscreteOp& op, const PotentialFn& V,
                                                         const PotentialFn& V_tilde) {
  const Eigen::ArrayXd diff = V_tilde.values().array() - V.values().array();
  if ((diff < 0.0).any() || !(diff > 0.0).any()) {
    throw Error(ErrorCode::ordering_precondition_failed, "need V~ >= V with strict inequality at some node");
  }
  EigenMonotonicityReport r;
  r.lambda_V = principal_eigenpair(op, V).lambda_star;
  r.lambda_V_tilde = principal_eigenpair(op, V_tilde).lambda_star;
  r.strict = r.lambda_V_tilde > r.lambda_V;
  return r;
}

/// Grid on `domain` with n nodes (interval) or n nodes per axis (ball).
inline GridPtr make_grid(const Domain& domain, int n) {
  if (domain.is_interval()) return make_interval_grid(domain.as_interval().a, domain.as_interval().b, n);
  return make_ball_grid(domain.as_ball().radius, n, domain.as_ball().center);
}

struct DomainMonotonicityReport {
  double lambda_inner = 0.0;
  double lambda_outer = 0.0;
  bool strict = false;
  double ratio() const { return lambda_inner / lambda_outer; }
};

/// lambda*_0 on `inner` versus `outer`, same node count on both.
inline DomainMonotonicityReport domain_monotonicity_report(double s, const Domain& inner, const Domain& outer, int n) {
  if (!inner.strictly_inside(outer)) {
    throw Error(ErrorCode::containment_precondition_failed, "inner domain must lie strictly inside outer");
  }
  DomainMonotonicityReport r;
  r.lambda_inner = principal_eigenpair(assemble(make_grid(inner, n), s)).lambda_star;
  r.lambda_outer = principal_eigenpair(assemble(make_grid(outer, n), s)).lambda_star;
  r.strict = r.lambda_inner > r.lambda_outer;
  return r;
}

struct DomainSequenceReport {
  double lambda_inner = 0.0;
  std::vector<double> lambda_outer;
  /// Eigenvalues strictly increase along the sequence and stay below lambda_inner.
  bool increasing_below_inner = false;
};

/// Outer domains must be listed from largest to smallest, all containing `inner`.
inline DomainSequenceReport domain_sequence_report(double s, const Domain& inner, const std::vector<Domain>& outers,
                                                   int n) {
  DomainSequenceReport r;
  r.lambda_inner = principal_eigenpair(assemble(make_grid(inner, n), s)).lambda_star;
  bool ok = true;
  for (const auto& outer : outers) {
    const auto rep = domain_monotonicity_report(s, inner, outer, n);
    if (!r.lambda_outer.empty() && !(rep.lambda_outer > r.lambda_outer.back())) ok = false;
    if (!rep.strict) ok = false;
    r.lambda_outer.push_back(rep.lambda_outer);
  }
  r.increasing_below_inner = ok;
  return r;
}

}  // namespace fracprodi
