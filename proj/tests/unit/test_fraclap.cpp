#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "fracprodi/fraclap.hpp"
#include "fracprodi/linear.hpp"
#include "fracprodi/spectral.hpp"
#include "oracles/oracles.hpp"

using namespace fracprodi;
using std::numbers::pi;

TEST(NormalizingConstant, HalfLaplacianIn1D) {
  // Kernel of the 1D half-Laplacian is (1/pi)|x|^{-2}.
  EXPECT_NEAR(normalizing_constant(1, 0.5), 1.0 / pi, 1e-14);
}

TEST(NormalizingConstant, PositiveOnScan) {
  for (int k = 1; k < 100; ++k) {
    EXPECT_GT(normalizing_constant(1, 0.01 * k), 0.0);
    EXPECT_GT(normalizing_constant(2, 0.01 * k), 0.0);
  }
}

TEST(NormalizingConstant, MatchesHighPrecisionGamma) {
  EXPECT_NEAR(normalizing_constant(2, 0.25), oracles::normalizing_constant_mp(2, 0.25), 1e-10);
  for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (int d : {1, 2}) {
      EXPECT_NEAR(normalizing_constant(d, s), oracles::normalizing_constant_mp(d, s), 1e-10) << d << " " << s;
    }
  }
}

TEST(NormalizingConstant, RejectsOrderOutsideUnitInterval) {
  EXPECT_THROW(normalizing_constant(1, 0.0), Error);
  EXPECT_THROW(normalizing_constant(1, 1.0), Error);
  EXPECT_THROW(normalizing_constant(3, 0.5), Error);
}

TEST(FcdWeights, HalfOrderValues) {
  const auto g = fcd_weights(0.5, 4);
  EXPECT_NEAR(g[0], 4.0 / pi, 1e-14);
  EXPECT_NEAR(g[1], -4.0 / (3.0 * pi), 1e-14);
}

TEST(FcdWeights, SignStructure) {
  for (double s : {0.001, 0.1, 0.5, 0.9, 0.999}) {
    const auto g = fcd_weights(s, 200);
    EXPECT_GT(g[0], 0.0);
    for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LT(g[k], 0.0) << s << " " << k;
  }
}

TEST(Assemble1d, ThreeNodeEntries) {
  const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, 3), 0.5);
  EXPECT_NEAR(op.matrix(0, 0), 8.0 / pi, 1e-13);
  EXPECT_NEAR(op.matrix(1, 1), 8.0 / pi, 1e-13);
  EXPECT_NEAR(op.matrix(0, 1), -8.0 / (3.0 * pi), 1e-13);
  EXPECT_NEAR(op.matrix(1, 0), -8.0 / (3.0 * pi), 1e-13);
}

TEST(Assemble1d, MMatrixStructure) {
  for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (int n : {50, 200}) {
      const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, n), s);
      const auto& A = op.matrix;
      for (Eigen::Index i = 0; i < A.rows(); ++i) {
        EXPECT_GT(A(i, i), 0.0);
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
          if (i != j) {
            ASSERT_LE(A(i, j), 0.0);
          }
        }
      }
      EXPECT_GT(op.row_sums().minCoeff(), 0.0) << s << " " << n;
      EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12 * A.cwiseAbs().maxCoeff());
    }
  }
}

TEST(Assemble1d, ExtremeOrdersKeepPositiveRowSums) {
  for (double s : {0.001, 0.999}) {
    const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, 200), s);
    EXPECT_GT(op.row_sums().minCoeff(), 0.0) << s;
  }
}

TEST(Assemble1d, TorsionIsMappedToOne) {
  const auto g = make_interval_grid(-1.0, 1.0, 400);
  const auto op = assemble_1d(g, 0.5);
  const auto u = GridFn::from_function(g, [](const Point& p) { return oracles::torsion_ball(1, 0.5, p[0] * p[0]); });
  const auto au = apply(op, u);
  // Away from the boundary layer the discrete operator reproduces (-Delta)^{1/2} u = 1.
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->distance_to_boundary(i) > 0.25) {
      EXPECT_NEAR(au[i], 1.0, 0.02) << g->node(i)[0];
    }
  }
}

TEST(Assemble1d, SelfConvergenceOnSmoothProfile) {
  // Nested grids: n + 1 intervals divides 3200.
  const auto profile = [](const Point& p) { return std::pow(1.0 - p[0] * p[0], 3); };
  const auto evaluate = [&](int intervals) {
    const auto g = make_interval_grid(-1.0, 1.0, intervals - 1);
    return apply(assemble_1d(g, 0.5), GridFn::from_function(g, profile));
  };
  const auto reference = evaluate(3200);
  std::vector<double> errors;
  for (int intervals : {100, 200, 400, 800}) {
    const auto au = evaluate(intervals);
    const int stride = 3200 / intervals;
    double err = 0.0;
    for (std::size_t i = 0; i < au.size(); ++i) {
      const double x = au.grid()->node(i)[0];
      if (std::abs(x) > 0.5) continue;
      err = std::max(err, std::abs(au[i] - reference[(i + 1) * stride - 1]));
    }
    errors.push_back(err);
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    EXPECT_GE(std::log2(errors[k - 1] / errors[k]), 1.0) << k;
  }
}

TEST(Assemble1d, EigenvalueScalesWithDomainSize) {
  for (double s : {0.3, 0.5, 0.7}) {
    const double l1 = principal_eigenpair(assemble_1d(make_interval_grid(-1.0, 1.0, 400), s)).lambda_star;
    const double l3 = principal_eigenpair(assemble_1d(make_interval_grid(-3.0, 3.0, 400), s)).lambda_star;
    EXPECT_NEAR(l3 / l1, std::pow(3.0, -2.0 * s), 0.005 * std::pow(3.0, -2.0 * s));
  }
}

TEST(Assemble2d, ZeroMapsToZeroAndSymmetric) {
  const auto g = make_ball_grid(1.0, 15);
  const auto op = assemble_2d(g, 0.25);
  EXPECT_EQ(apply(op, GridFn(g)).sup_norm(), 0.0);
  const auto& A = op.matrix;
  EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12 * A.cwiseAbs().maxCoeff());
  EXPECT_GT(op.row_sums().minCoeff(), 0.0);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (i != j) {
        ASSERT_LE(A(i, j), 0.0);
      }
    }
  }
}

TEST(Assemble2d, TorsionAtCentreMatchesClosedForm) {
  const auto centre_value = [](double s, int m) {
    const auto g = make_ball_grid(1.0, m);
    const auto op = assemble_2d(g, s);
    const auto u = solve_dirichlet(op, PotentialFn(g), GridFn::constant(g, 1.0));
    return u[g->nearest_node({0.0, 0.0})];
  };
  const double exact_quarter = oracles::torsion_ball(2, 0.25, 0.0);
  EXPECT_NEAR(centre_value(0.25, 19), exact_quarter, 0.01 * exact_quarter);
  EXPECT_NEAR(centre_value(0.25, 39), exact_quarter, 0.01 * exact_quarter);

  // The dropped self-cell costs O(h^{2-2s}); at s = 1/2 that is first order.
  const double exact_half = oracles::torsion_ball(2, 0.5, 0.0);
  const double coarse = std::abs(centre_value(0.5, 19) - exact_half);
  const double fine = std::abs(centre_value(0.5, 39) - exact_half);
  EXPECT_LT(coarse, 0.05 * exact_half);
  EXPECT_LT(fine, coarse);
}

TEST(Apply, LinearityAndGridMismatch) {
  const auto g = make_interval_grid(-1.0, 1.0, 64);
  const auto op = assemble_1d(g, 0.4);
  const auto u = GridFn::from_function(g, [](const Point& p) { return std::sin(3 * p[0]); });
  const auto v = GridFn::from_function(g, [](const Point& p) { return p[0] * p[0]; });
  const auto lhs = apply(op, u + v);
  const auto rhs = apply(op, u) + apply(op, v);
  EXPECT_LE((lhs - rhs).sup_norm(), 1e-12 * (1.0 + lhs.sup_norm()));
  const auto other = make_interval_grid(-1.0, 1.0, 65);
  EXPECT_THROW(apply(op, GridFn(other)), Error);
}

TEST(Apply, EigenpairResidual) {
  const auto g = make_interval_grid(-1.0, 1.0, 400);
  const auto op = assemble_1d(g, 0.5);
  const auto pair = principal_eigenpair(op);
  EXPECT_LE((apply(op, pair.psi) - pair.lambda_star * pair.psi).sup_norm(), 1e-8);
}

TEST(MatrixDump, RowMajorCsv) {
  const auto op = assemble_1d(make_interval_grid(-1.0, 1.0, 3), 0.5);
  std::stringstream ss;
  write_matrix_csv(ss, op);
  std::string line;
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
  }
  EXPECT_EQ(rows, 3);
}
