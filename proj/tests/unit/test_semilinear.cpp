#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "fracprodi/fraclap.hpp"
#include "fracprodi/semilinear.hpp"

using namespace fracprodi;

namespace {

APProblem jumping_problem(int n, double rho, double C_ap = 0.0, double mu_minus = 0.5, double mu_plus = 2.5) {
  const auto g = make_interval_grid(-1.0, 1.0, n);
  auto op = std::make_shared<const DiscreteOp>(assemble_1d(g, 0.5));
  return make_problem(op, Nonlinearity::jumping_linear(mu_minus, mu_plus), GridFn(g), rho,
                      PotentialFn::constant(g, mu_minus), PotentialFn::constant(g, mu_plus), C_ap);
}

}  // namespace

TEST(Nonlinearity, JumpingValues) {
  const auto f = Nonlinearity::jumping_linear(0.5, 2.5);
  EXPECT_EQ(eval_nonlinearity(f, 0, -2.0), -1.0);
  EXPECT_EQ(eval_nonlinearity(f, 0, 0.0), 0.0);
  EXPECT_EQ(eval_nonlinearity(f, 0, 2.0), 5.0);
  EXPECT_EQ(f.derivative(0, 0.0), 2.5);
  EXPECT_EQ(f.derivative(0, -1e-300), 0.5);
}

TEST(Nonlinearity, PowerValues) {
  const auto f = Nonlinearity::power_ap(1.0, 2.0, 0.5);
  EXPECT_EQ(f(0, 3.0), 9.0);
  EXPECT_EQ(f(0, -2.0), -1.0);
  EXPECT_EQ(f(0, 0.0), 0.0);
  EXPECT_THROW(Nonlinearity::power_ap(0.0, 2.0, 0.5), Error);
  EXPECT_THROW(Nonlinearity::power_ap(1.0, 1.0, 0.5), Error);
}

TEST(Nonlinearity, TabulatedInterpolatesAndVanishesAtZero) {
  const auto f = Nonlinearity::tabulated({-2.0, 0.0, 1.0, 3.0}, {-1.0, 0.0, 2.0, 8.0});
  EXPECT_EQ(f(0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f(0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(f(0, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(f(0, 4.0), 11.0);
  EXPECT_DOUBLE_EQ(f(0, -4.0), -2.0);
  EXPECT_DOUBLE_EQ(lipschitz_constant(f, -1.0, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(lipschitz_constant(f, -1.0, 2.0), 3.0);
  EXPECT_THROW(Nonlinearity::tabulated({-1.0, 1.0}, {0.0, 1.0}), Error);
  EXPECT_THROW(Nonlinearity::tabulated({0.0, 0.0}, {0.0, 1.0}), Error);
}

TEST(Lipschitz, FamilyFormulas) {
  EXPECT_EQ(lipschitz_constant(Nonlinearity::jumping_linear(0.5, 2.5), -1.0, 2.0), 2.5);
  EXPECT_EQ(lipschitz_constant(Nonlinearity::power_ap(1.0, 2.0, 0.5), 0.0, 3.0), 6.0);
  try {
    lipschitz_constant(Nonlinearity::jumping_linear(0.5, 2.5), 1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_interval);
  }
}

TEST(Lipschitz, BoundsDifferenceQuotients) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  const std::vector<Nonlinearity> fs{Nonlinearity::jumping_linear(-1.0, 2.5), Nonlinearity::power_ap(2.0, 1.5, 0.3),
                                     Nonlinearity::tabulated({-2.0, 0.0, 1.0, 3.0}, {-1.0, 0.0, 2.0, 8.0})};
  for (const auto& f : fs) {
    const double theta = lipschitz_constant(f, -3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
      const double a = unif(rng);
      const double b = unif(rng);
      EXPECT_LE(std::abs(f(0, a) - f(0, b)), theta * std::abs(a - b) * (1 + 1e-12) + 1e-15) << f.name();
    }
  }
}

TEST(ApAssumptions, JumpingFamilyPasses) {
  const auto p = jumping_problem(200, 0.0);
  EXPECT_NEAR(p.lambda0, 1.158, 0.01);
  const auto r = check_ap_assumptions(p);
  EXPECT_TRUE(r.all_passed());
  EXPECT_NEAR(r.lambda_minus_V1, p.lambda0 - 0.5, 1e-9);
  EXPECT_NEAR(r.lambda_minus_V2, p.lambda0 - 2.5, 1e-9);
}

TEST(ApAssumptions, V1AboveEigenvalueFails) {
  const auto p = jumping_problem(200, 0.0, 0.0, 2.0, 2.5);
  const auto r = check_ap_assumptions(p);
  EXPECT_FALSE(r.find("eigen_minus_V1_positive")->passed);
  EXPECT_FALSE(r.all_passed());
}

TEST(ApAssumptions, ExponentWindow) {
  const auto g = make_ball_grid(1.0, 15);
  auto op = std::make_shared<const DiscreteOp>(assemble_2d(g, 0.25));
  // min_q (q^p - 3q) is -4 at p = 3/2 and -9/4 at p = 2.
  const auto make = [&](double p) {
    return make_problem(op, Nonlinearity::power_ap(1.0, p, 0.5), GridFn(g), 0.0, PotentialFn::constant(g, 0.5),
                        PotentialFn::constant(g, 3.0), 4.0);
  };
  // (d + 2s)/(d - 2s) = 5/3 for d = 2, s = 1/4.
  const auto inside = check_ap_assumptions(make(1.5));
  EXPECT_TRUE(inside.find("exponent_window")->passed);
  EXPECT_TRUE(inside.find("dimension_above_one_plus_2s")->passed);
  EXPECT_TRUE(inside.find("lower_bound_nonnegative_q")->passed);
  const auto outside = check_ap_assumptions(make(2.0));
  EXPECT_FALSE(outside.find("exponent_window")->passed);
  EXPECT_NEAR(outside.find("exponent_window")->margin, 5.0 / 3.0 - 2.0, 1e-12);
}

TEST(Subsolution, ZeroDataGivesZero) {
  const auto u = build_subsolution(jumping_problem(200, 0.0));
  EXPECT_EQ(u.sup_norm(), 0.0);
}

TEST(Subsolution, StrictlyNegativeWithPositiveConstant) {
  const auto u = build_subsolution(jumping_problem(200, 0.0, 0.1));
  EXPECT_LT(u.max(), 0.0);
}

TEST(Subsolution, InequalityMarginOnRandomProblems) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto base = jumping_problem(150, 0.0, 0.2);
  for (int k = 0; k < 20; ++k) {
    const auto h = GridFn::from_function(base.grid(), [&](const Point&) { return unif(rng); });
    const auto p = base.with_h(h).with_rho(5.0 * unif(rng));
    const auto u = build_subsolution(p);
    EXPECT_LE(u.max(), 1e-10);
    EXPECT_LE(residual(p, u).max(), 1e-8);
  }
}

TEST(Supersolution, FeasibleOnlyForNegativeRho) {
  const auto neg = build_supersolution(jumping_problem(200, -10.0));
  EXPECT_TRUE(neg.feasible);
  EXPECT_GT(neg.u_bar.min(), 0.0);
  const auto pos = build_supersolution(jumping_problem(200, 10.0));
  EXPECT_FALSE(pos.feasible);
  EXPECT_GT(pos.u_bar.min(), 0.0);
}

TEST(MonotoneIteration, JumpingCaseConvergesToMinimalSolution) {
  const auto p = jumping_problem(400, -1.0);
  const auto lower = build_subsolution(p);
  // rho = -1 is not negative enough for the growth-constant supersolution; a scaled principal
  // eigenfunction is a supersolution here since (A - 2.5) (-c Phi1) = c (2.5 - lambda0) Phi1 >= -Phi1.
  const auto sup = build_supersolution(p);
  EXPECT_FALSE(sup.feasible);
  const auto upper = GridFn(p.grid());
  const auto r = monotone_iteration(p, lower, upper, {1e-10, 10'000});
  EXPECT_TRUE(r.converged());
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_EQ(r.theta, 2.5);
  EXPECT_EQ(static_cast<int>(r.log.size()), r.iters);
  const auto exact = (-1.0 / (p.lambda0 - 0.5)) * p.phi1;
  EXPECT_LE((r.solution - exact).sup_norm(), 1e-8);
}

TEST(MonotoneIteration, ZeroNonlinearityConvergesImmediately) {
  const auto g = make_interval_grid(-1.0, 1.0, 100);
  auto op = std::make_shared<const DiscreteOp>(assemble_1d(g, 0.5));
  const auto p = make_problem(op, Nonlinearity::jumping_linear(0.0, 0.0), GridFn(g), 0.0, PotentialFn(g),
                              PotentialFn(g), 0.0);
  const auto lower = build_subsolution(p);
  const auto upper = build_supersolution(p);
  ASSERT_TRUE(upper.feasible);
  const auto r = monotone_iteration(p, lower, upper.u_bar);
  EXPECT_EQ(r.iters, 1);
  EXPECT_EQ(r.solution.sup_norm(), 0.0);
}

TEST(MonotoneIteration, ZeroIsMinimalAtZeroRho) {
  const auto p = jumping_problem(200, 0.0);
  const auto r = monotone_iteration(p, build_subsolution(p), GridFn(p.grid()));
  EXPECT_EQ(r.solution.sup_norm(), 0.0);
}

TEST(MonotoneIteration, RejectsMisorderedBounds) {
  const auto p = jumping_problem(100, -1.0);
  const auto lower = build_subsolution(p);
  EXPECT_THROW(monotone_iteration(p, GridFn(p.grid()), lower), Error);
}

TEST(MonotoneIteration, GuardDetectsBlowUp) {
  const auto p = jumping_problem(200, 1.0);
  const auto r = guarded_iteration(p, build_subsolution(p), 50.0);
  EXPECT_EQ(r.status, IterationStatus::guard_exceeded);
  for (std::size_t k = 1; k < r.log.size(); ++k) EXPECT_GE(r.log[k].n, r.log[k - 1].n);
}

TEST(Residual, SimpleCases) {
  auto p = jumping_problem(100, 0.0);
  EXPECT_EQ(residual(p, GridFn(p.grid())).sup_norm(), 0.0);
  p.rho = 1.0;
  EXPECT_EQ((residual(p, GridFn(p.grid())) + p.phi1).sup_norm(), 0.0);
}

TEST(NewtonDeflated, FindsSecondSolutionOfJumpingProblem) {
  const auto p = jumping_problem(400, -0.5);
  const auto minimal = monotone_iteration(p, build_subsolution(p), GridFn(p.grid())).solution;
  const auto found = newton_deflated(p, {minimal});
  ASSERT_EQ(found.size(), 1u);
  const auto exact = (-0.5 / (p.lambda0 - 2.5)) * p.phi1;
  EXPECT_LE((found[0] - exact).sup_norm(), 1e-8);
  EXPECT_GE((found[0] - minimal).sup_norm(), 1e-3);
  EXPECT_LE(residual(p, found[0]).sup_norm(), 1e-8);
  // Minimality against the other solution.
  EXPECT_LE((minimal - found[0]).max(), 1e-8);

  NewtonOptions opts;
  opts.base = minimal;
  EXPECT_EQ(newton_deflated(p, {}, opts).size(), 2u);
}

TEST(NewtonDeflated, LinearProblemHasNothingElse) {
  const auto g = make_interval_grid(-1.0, 1.0, 100);
  auto op = std::make_shared<const DiscreteOp>(assemble_1d(g, 0.5));
  const auto p = make_problem(op, Nonlinearity::jumping_linear(0.0, 0.0), GridFn::constant(g, 1.0), 0.0,
                              PotentialFn(g), PotentialFn(g), 0.0);
  const auto u = solve_dirichlet(*op, PotentialFn(g), GridFn::constant(g, 1.0));
  EXPECT_TRUE(newton_deflated(p, {u}).empty());
  const auto fresh = newton_deflated(p, {});
  ASSERT_EQ(fresh.size(), 1u);
  EXPECT_LE((fresh[0] - u).sup_norm(), 1e-8);
}

TEST(NewtonDeflated, NoSolutionAboveThreshold) {
  const auto p = jumping_problem(200, 0.5);
  EXPECT_TRUE(newton_deflated(p, {}).empty());
}

TEST(ApAssumptions, LowerBoundMarginIsMeasured) {
  const auto g = make_interval_grid(-1.0, 1.0, 50);
  auto op = std::make_shared<const DiscreteOp>(assemble_1d(g, 0.5));
  const auto p = make_problem(op, Nonlinearity::power_ap(1.0, 2.0, 0.5), GridFn(g), 0.0, PotentialFn::constant(g, 0.5),
                              PotentialFn::constant(g, 3.0), 2.0);
  const auto r = check_ap_assumptions(p);
  EXPECT_FALSE(r.find("lower_bound_nonnegative_q")->passed);
  EXPECT_NEAR(r.find("lower_bound_nonnegative_q")->margin, -0.25, 1e-2);
  EXPECT_TRUE(r.find("lower_bound_nonpositive_q")->passed);
}
