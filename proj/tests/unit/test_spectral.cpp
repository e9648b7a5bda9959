#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fracprodi/fraclap.hpp"
#include "fracprodi/spectral.hpp"
#include "oracles/oracles.hpp"

using namespace fracprodi;

namespace {

double lambda0(double s, double a, double b, int n) {
  return principal_eigenpair(assemble_1d(make_interval_grid(a, b, n), s)).lambda_star;
}

}  // namespace

TEST(PrincipalEigenpair, HalfLaplacianOnUnitInterval) {
  const double l200 = lambda0(0.5, -1, 1, 200);
  const double l400 = lambda0(0.5, -1, 1, 400);
  const double l800 = lambda0(0.5, -1, 1, 800);
  const double l1600 = lambda0(0.5, -1, 1, 1600);
  // The eigenvalue converges at first order in h.
  const double r1 = oracles::richardson(l200, l400, 1.0);
  const double r2 = oracles::richardson(l400, l800, 1.0);
  const double r3 = oracles::richardson(l800, l1600, 1.0);
  EXPECT_NEAR(r2, r3, 0.002 * r3);
  EXPECT_NEAR(r1, r3, 0.002 * r3);
  EXPECT_NEAR(l800, r3, 0.01 * r3);
  EXPECT_NEAR(l800, 1.1578, 0.01 * 1.1578);
}

TEST(PrincipalEigenpair, AgreesWithDenseSolver) {
  for (double s : {0.2, 0.5, 0.8}) {
    const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, 150), s);
    EXPECT_NEAR(principal_eigenpair(op).lambda_star, oracles::smallest_eigenvalue_dense(op.matrix), 1e-9) << s;
  }
  const auto op2 = assemble_2d(make_ball_grid(1.0, 15), 0.25);
  EXPECT_NEAR(principal_eigenpair(op2).lambda_star, oracles::smallest_eigenvalue_dense(op2.matrix), 1e-9);
}

TEST(PrincipalEigenpair, PositiveNormalizedWithSmallResidual) {
  const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, 400), 0.5);
  const auto pair = principal_eigenpair(op);
  EXPECT_GT(pair.psi.min(), 0.0);
  EXPECT_EQ(pair.psi.sup_norm(), 1.0);
  EXPECT_LE(pair.residual, 1e-8);
}

TEST(PrincipalEigenpair, ShiftIdentity) {
  const auto g = make_interval_grid(-1.0, 1.0, 200);
  const auto op = assemble_1d(g, 0.5);
  const double base = principal_eigenpair(op).lambda_star;
  for (double c : {-5.0, 1.0, 10.0}) {
    EXPECT_NEAR(principal_eigenpair(op, PotentialFn::constant(g, c)).lambda_star, base + c, 1e-10) << c;
  }
}

TEST(PrincipalEigenpair, ApproachesClassicalValueAsOrderGrowsToOne) {
  // The discrete first-order error is large near s = 1 at desk resolution; the trend is what is checked.
  const double classical = std::numbers::pi * std::numbers::pi / 4.0;
  double prev = 0.0;
  for (double s : {0.5, 0.7, 0.9, 0.99}) {
    const double l = lambda0(s, -1, 1, 400);
    EXPECT_GT(l, prev) << s;
    prev = l;
  }
  EXPECT_NEAR(prev, classical, 0.1 * classical);
}

TEST(PrincipalEigenpair, RandomStartGivesSamePair) {
  const auto g = make_interval_grid(-1.0, 1.0, 200);
  const auto op = assemble_1d(g, 0.3);
  const auto ref = principal_eigenpair(op);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  SpectralOptions opts;
  opts.start = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(g->size()), [&] { return unif(rng); });
  const auto other = principal_eigenpair(op, PotentialFn(g), opts);
  EXPECT_NEAR(other.lambda_star, ref.lambda_star, 1e-10);
  EXPECT_LE((other.psi - ref.psi).sup_norm(), 1e-6);
}

TEST(PrincipalEigenpair, RejectsBadTolerance) {
  const auto g = make_interval_grid(-1.0, 1.0, 20);
  SpectralOptions opts;
  opts.tol = 0.0;
  EXPECT_THROW(principal_eigenpair(assemble_1d(g, 0.5), PotentialFn(g), opts), Error);
}

TEST(SpectralGap, PrincipalEigenvalueIsSimple) {
  const auto g = make_interval_grid(-1.0, 1.0, 200);
  const auto op = assemble_1d(g, 0.5);
  const auto gap = spectral_gap(op, PotentialFn(g));
  const auto es = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(op.matrix, Eigen::EigenvaluesOnly).eigenvalues();
  EXPECT_NEAR(gap.lambda1, es[0], 1e-8);
  EXPECT_NEAR(gap.lambda2, es[1], 1e-8);
  EXPECT_GT(gap.gap(), 0.0);
}

TEST(PotentialMonotonicity, InteriorBumpIncreasesEigenvalue) {
  const auto g = make_interval_grid(-1.0, 1.0, 200);
  const auto op = assemble_1d(g, 0.5);
  const auto V = PotentialFn(g);
  const auto bump = GridFn::from_function(g, [](const Point& p) { return std::abs(p[0] - 0.2) < 0.1 ? 1.0 : 0.0; });
  const auto r = eigen_monotonicity_report(op, V, V + bump);
  EXPECT_TRUE(r.strict);
  EXPECT_GT(r.lambda_V_tilde, r.lambda_V);
}

TEST(PotentialMonotonicity, EqualPotentialRejected) {
  const auto g = make_interval_grid(-1.0, 1.0, 50);
  const auto op = assemble_1d(g, 0.5);
  try {
    eigen_monotonicity_report(op, PotentialFn(g), PotentialFn(g));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ordering_precondition_failed);
  }
}

TEST(PotentialMonotonicity, SmallGlobalShift) {
  const auto g = make_interval_grid(-1.0, 1.0, 200);
  const auto op = assemble_1d(g, 0.5);
  const auto r = eigen_monotonicity_report(op, PotentialFn(g), PotentialFn::constant(g, 1e-6));
  EXPECT_NEAR(r.lambda_V_tilde - r.lambda_V, 1e-6, 1e-9);
}

TEST(PotentialMonotonicity, RandomizedPairs) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-1.0, 3.0);
  std::uniform_real_distribution<double> extra(0.0, 1.0);
  const auto g = make_interval_grid(-1.0, 1.0, 80);
  const auto op = assemble_1d(g, 0.5);
  for (int k = 0; k < 50; ++k) {
    const auto V = GridFn::from_function(g, [&](const Point&) { return unif(rng); });
    auto d = GridFn::from_function(g, [&](const Point&) { return extra(rng) < 0.8 ? 0.0 : extra(rng); });
    if (d.max() <= 0.0) d = d + GridFn::constant(g, 0.1);
    EXPECT_TRUE(eigen_monotonicity_report(op, V, V + d).strict) << k;
  }
}

TEST(DomainMonotonicity, ScalingRatio) {
  const auto r = domain_monotonicity_report(0.5, Domain::interval(-1, 1), Domain::interval(-1.5, 1.5), 400);
  EXPECT_TRUE(r.strict);
  EXPECT_NEAR(r.ratio(), 1.5, 0.015);
}

TEST(DomainMonotonicity, EqualDomainsRejected) {
  try {
    domain_monotonicity_report(0.5, Domain::interval(-1, 1), Domain::interval(-1, 1), 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::containment_precondition_failed);
  }
}

TEST(DomainMonotonicity, ShrinkingOuterSequence) {
  std::vector<Domain> outers;
  for (int k : {2, 4, 8}) outers.push_back(Domain::interval(-1.0 - 1.0 / k, 1.0 + 1.0 / k));
  const auto r = domain_sequence_report(0.5, Domain::interval(-1, 1), outers, 300);
  EXPECT_TRUE(r.increasing_below_inner);
  ASSERT_EQ(r.lambda_outer.size(), 3u);
  EXPECT_LT(r.lambda_outer.back(), r.lambda_inner);
}

TEST(DomainMonotonicity, BallsInTwoDimensions) {
  const auto r = domain_monotonicity_report(0.25, Domain::ball({0, 0}, 0.8), Domain::ball({0, 0}, 1.0), 21);
  EXPECT_TRUE(r.strict);
  EXPECT_NEAR(r.ratio(), std::pow(1.25, 0.5), 0.02 * std::pow(1.25, 0.5));
}
