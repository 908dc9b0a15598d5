#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "slmbound/barankin.hpp"
#include "slmbound/bounds.hpp"
#include "slmbound/montecarlo.hpp"
#include "test_util.hpp"

using namespace slmbound;

TEST(GridPoints, ShapesAndPlacement) {
  const auto m = SparseLinearModel::ssnm(3, 1.0, 1);
  Vector x0 = Vector::Zero(3);
  x0[0] = 0.5;
  const TestPointSet one = grid_points(m, SupportSet({1}, 3), x0, 1.0, 1);
  ASSERT_EQ(one.points.size(), 1u);
  EXPECT_EQ(one.points[0], x0);

  const TestPointSet zero_grid = grid_points(m, SupportSet({1}, 3), Vector::Zero(3), 1.0, 3);
  ASSERT_EQ(zero_grid.points.size(), 3u);  // the centre coincides with x0
  EXPECT_EQ(zero_grid.points[0], Vector::Zero(3));
  EXPECT_EQ(zero_grid.points[1], -Vector::Unit(3, 1));
  EXPECT_EQ(zero_grid.points[2], Vector::Unit(3, 1));

  const TestPointSet off = grid_points(m, SupportSet({1}, 3), x0, 1.0, 3);
  EXPECT_EQ(off.points.size(), 4u);

  const auto m2 = SparseLinearModel::ssnm(4, 1.0, 2);
  const TestPointSet g2 = grid_points(m2, SupportSet({0, 3}, 4), Vector::Zero(4), 2.0, 5);
  EXPECT_EQ(g2.points.size(), 25u);
  for (const Vector& p : g2.points) EXPECT_EQ(p[1] + p[2], 0.0);
  EXPECT_THROW(grid_points(m, SupportSet({1}, 3), x0, 1.0, 0), ArgumentError);
}

TEST(FinitePointBound, SinglePointIsZero) {
  const auto m = SparseLinearModel::ssnm(3, 1.0, 1);
  Vector x0 = Vector::Zero(3);
  x0[2] = 1.7;
  const OracleResult r = finite_point_bound(m, MeanFunction::unbiased(2), x0, TestPointSet{{x0}, 1e-12});
  EXPECT_NEAR(r.value, 0.0, 1e-9);
  EXPECT_EQ(r.n_points, 1);
}

TEST(FinitePointBound, HammersleyChapmanRobbinsPair) {
  const double sigma2 = 1.7;
  const auto m = SparseLinearModel::ssnm(4, sigma2, 1);
  Vector x0 = Vector::Zero(4);
  x0[1] = 0.8;
  for (double delta : {0.5, 1.0, 2.0, -1.3}) {
    const OracleResult r = finite_point_bound(m, MeanFunction::unbiased(1), x0, two_points(x0, 1, delta));
    const double hcr = delta * delta / (std::exp(delta * delta / sigma2) - 1.0);
    EXPECT_NEAR(r.value, hcr, 1e-12 * hcr);
  }
  const double delta = 1e-3 * std::sqrt(sigma2);
  const OracleResult lim = finite_point_bound(m, MeanFunction::unbiased(1), x0, two_points(x0, 1, delta));
  EXPECT_NEAR(lim.value, sigma2, 1e-3 * sigma2);
}

TEST(FinitePointBound, ValidatesPointSet) {
  const auto m = SparseLinearModel::ssnm(3, 1.0, 1);
  const Vector x0 = Vector::Unit(3, 0);
  const MeanFunction g = MeanFunction::unbiased(0);
  EXPECT_THROW(finite_point_bound(m, g, x0, TestPointSet{{}, 0.0}), ArgumentError);
  EXPECT_THROW(finite_point_bound(m, g, x0, TestPointSet{{Vector::Zero(3)}, 0.0}), ArgumentError);
  EXPECT_THROW(finite_point_bound(m, g, x0, TestPointSet{{x0, x0}, 0.0}), ArgumentError);
  EXPECT_THROW(finite_point_bound(m, g, x0, TestPointSet{{x0, Vector::Ones(3)}, 0.0}), ArgumentError);
  EXPECT_THROW(finite_point_bound(m, g, x0, TestPointSet{{x0}, -1.0}), ArgumentError);
}

TEST(FinitePointBound, ReportsIllConditioning) {
  const auto m = SparseLinearModel::ssnm(3, 1.0, 1);
  const Vector x0 = Vector::Unit(3, 0);
  Vector near = x0;
  near[0] += 1e-9;
  Vector far = x0;
  far[0] += 1.0;
  try {
    finite_point_bound(m, MeanFunction::unbiased(0), x0, TestPointSet{{x0, far, near}, 0.0});
    FAIL() << "expected IllConditionedError";
  } catch (const IllConditionedError& e) {
    EXPECT_EQ(e.usable_points(), 2);
  }
  // Jitter keeps the system solvable and the value valid.
  const OracleResult r =
      finite_point_bound(m, MeanFunction::unbiased(0), x0, TestPointSet{{x0, far, near}, 1e-12});
  EXPECT_LE(r.value, 1.0 + 1e-9);
  EXPECT_GT(r.condition_estimate, 1.0);
}

TEST(FinitePointBound, SsnmGridApproachesClosedFormFromBelow) {
  const auto m = SparseLinearModel::ssnm(3, 1.0, 1);
  Vector x0 = Vector::Zero(3);
  x0[0] = 2.0;
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    const MeanFunction g = MeanFunction::unbiased(k);
    const BoundResult best = best_support_bound(m, g, x0);
    total += finite_point_bound(m, g, x0, grid_points(m, best.support, x0, 6.0, 41)).value;
  }
  const double target = 1.0 + 2.0 * std::exp(-4.0);
  EXPECT_LE(total, target + 1e-8);
  EXPECT_GE(total, 0.98 * target);
}

TEST(FinitePointBound, NestedRefinementNeverDecreases) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 6; ++t) {
    const int s = 1 + t % 2;
    const auto m = SparseLinearModel::ssnm(4, 1.0, s);
    const Vector x0 = testutil::random_sparse(rng, 4, s, 1.5);
    const MeanFunction g = MeanFunction::hard_threshold(t % 4, 1.0 + t % 3, 1.0);
    const SupportSet k = best_support_bound(m, g, x0).support;
    double prev = -1e300;
    for (int per_axis : {3, 5, 9, 17, 33}) {
      if (s == 2 && per_axis > 17) break;
      const double v = finite_point_bound(m, g, x0, grid_points(m, k, x0, 6.0, per_axis)).value;
      EXPECT_GE(v, prev - 1e-8) << "per_axis " << per_axis;
      prev = v;
    }
  }
}

TEST(FinitePointBound, DominatesSupportBoundOnFineGrids) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 6; ++t) {
    const auto m = SparseLinearModel::ssnm(4, 1.0, 1);
    const Vector x0 = testutil::random_sparse(rng, 4, 1, 2.0);
    for (int k = 0; k < 4; ++k) {
      const MeanFunction g = MeanFunction::hard_threshold(k, 2.0, 1.0);
      const BoundResult best = best_support_bound(m, g, x0);
      const double v = finite_point_bound(m, g, x0, grid_points(m, best.support, x0, 6.0, 41)).value;
      EXPECT_GE(v, best.value - 1e-8);
    }
  }
}

TEST(FinitePointBound, ConvergesToCrbForUnbiasedLgmEmbedding) {
  Matrix h(3, 4);
  h << 1, 0, 0.6, 0.3, 0, 1, 0.8, 0.1, 0, 0, 0, 0.9;
  h.colwise().normalize();
  h.col(1) *= 1.4;
  const SparseLinearModel m(h, 0.5, 1);
  Vector x0 = Vector::Zero(4);
  x0[1] = 1.2;
  const SupportSet k({1}, 4);
  const double crb = lgm_crb(submatrix(h, k), Vector::Ones(1), 0.5);
  const OracleResult r = finite_point_bound(m, MeanFunction::unbiased(1), x0,
                                            grid_points(m, k, x0, 6.0 * m.sigma(), 81));
  EXPECT_LE(r.value, crb + 1e-8);
  EXPECT_GE(r.value, 0.99 * crb);
}

TEST(FinitePointBound, BelowEstimatorVariance) {
  const auto m = SparseLinearModel::ssnm(4, 1.0, 1);
  Vector x0 = Vector::Zero(4);
  x0[2] = 1.5;
  const double t = 2.0;
  const MeanFunction g = MeanFunction::hard_threshold(2, t, 1.0);
  const double v = finite_point_bound(m, g, x0, grid_points(m, SupportSet({2}, 4), x0, 6.0, 41)).value;
  SimulationSpec spec{ObservationModel::of(m), x0, Estimator::hard_threshold(t), 1'000'000, 12};
  const EstimatorStats st = simulate(spec);
  EXPECT_LE(v, st.component_variances[2] + 3.0 * st.se_component_variances[2]);
}
