#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "viana/stats.hpp"
#include "viana/system.hpp"
#include "viana/tangent.hpp"

using namespace viana;

namespace {

const SystemParams& skew() {
  static const SystemParams sp = default_params();
  return sp;
}

const SystemParams& perturbed() {
  static const SystemParams sp = make_params(16, find_misiurewicz_a0(4, 1), 1e-3, Mode::perturbed, 1e-4);
  return sp;
}

}  // namespace

TEST(SingularValues, MatchEigenSvd) {
  Rng g = make_rng(1, "svd");
  for (int i = 0; i < 5000; ++i) {
    const Point p{uniform01(g), uniform(g, perturbed().trap_lo, perturbed().trap_hi)};
    const Jacobian J = jacobian(perturbed(), p);
    Eigen::Matrix2d M;
    M << J.m00, J.m01, J.m10, J.m11;
    const Eigen::Vector2d s = Eigen::JacobiSVD<Eigen::Matrix2d>(M).singularValues();
    EXPECT_NEAR(J.sigma_max(), s(0), 1e-10 * s(0));
    EXPECT_NEAR(J.sigma_min(), s(1), 1e-9 * std::max(1.0, s(1)));
    EXPECT_NEAR(J.inv_norm(), 1.0 / s(1), 1e-8 / s(1));
  }
}

TEST(CenterDirection, VerticalInSkewMode) {
  Rng g = make_rng(2, "ec");
  for (int i = 0; i < 50; ++i) {
    const TrackedPoint x = random_tracked(skew(), g);
    const auto ec = center_direction(skew(), x);
    ASSERT_TRUE(ec.ok);
    EXPECT_LT(line_angle(ec.dir, {0.0, 1.0}), 1e-12);
  }
}

TEST(CenterDirection, InvariantUnderDerivativeInPerturbedMode) {
  Rng g = make_rng(3, "ec");
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const TrackedPoint x = srb_sample(perturbed(), g, 50);
    const auto e0 = center_direction(perturbed(), x);
    TrackedPoint y = x;
    step(perturbed(), y);
    const auto e1 = center_direction(perturbed(), y);
    if (!e0.ok || !e1.ok) continue;
    ++checked;
    EXPECT_LT(line_angle(jacobian(perturbed(), x.point()) * e0.dir, e1.dir), 1e-6);
  }
  EXPECT_GT(checked, 40);
}

TEST(CenterDirection, DominatedByUnstable) {
  Rng g = make_rng(4, "eu");
  for (int i = 0; i < 30; ++i) {
    const TrackedPoint x = srb_sample(perturbed(), g, 50);
    const auto eu = unstable_direction(perturbed(), x);
    const auto ec = center_direction(perturbed(), x);
    if (!eu.ok || !ec.ok) continue;
    EXPECT_GT(line_angle(eu.dir, ec.dir), 0.5);
  }
}

TEST(PsiC, EqualsLogTwoAbsTInSkewMode) {
  Rng g = make_rng(5, "psi");
  for (int i = 0; i < 1000; ++i) {
    const TrackedPoint x = random_tracked(skew(), g);
    EXPECT_DOUBLE_EQ(psi_c(skew(), x), std::log(2.0 * std::abs(x.t)));
  }
  TrackedPoint c = random_tracked(skew(), g);
  c.t = 0.0;
  EXPECT_EQ(psi_c(skew(), c), -kInf);
}

TEST(OrbitSegment, FieldsConsistent) {
  Rng g = make_rng(6, "seg");
  const TrackedPoint x = random_tracked(skew(), g);
  const auto s = make_segment(skew(), x, 100, true);
  ASSERT_EQ(s.size(), 100u);
  ASSERT_EQ(s.psi.size(), 100u);
  ASSERT_EQ(s.jac.size(), 100u);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) EXPECT_LT(dist(apply(skew(), s.points[k]), s.points[k + 1]), 1e-12);
  EXPECT_LT(dist(apply(skew(), s.points.back()), s.end.point()), 1e-12);
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_DOUBLE_EQ(s.inv_norm[k], jacobian(skew(), s.points[k]).inv_norm());
    EXPECT_EQ(s.digits[k], static_cast<int>(std::floor(s.points[k].theta * 16.0)));
  }
}

TEST(Lyapunov, UnstableNearLogD) {
  const auto v = lyapunov_batch(skew(), Exponent::unstable, 4, 20000, 7);
  for (const auto& e : v) EXPECT_NEAR(e.value, std::log(16.0), 0.5);
  EXPECT_TRUE(pairwise_agree(v));
}

TEST(Lyapunov, CenterPositive) {
  const auto c = calibrate_c0(skew(), 8, 20000, 8);
  EXPECT_GE(c.positive_fraction, 0.99);
  EXPECT_GT(c.c0, 0.0);
  for (double l : c.lambda_c) EXPECT_GE(l, c.c0);
}

TEST(Lyapunov, BatchIsDeterministic) {
  const auto a = lyapunov_batch(skew(), Exponent::center, 3, 5000, 9, 1);
  const auto b = lyapunov_batch(skew(), Exponent::center, 3, 5000, 9, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
}

TEST(PairwiseAgree, DetectsOutlier) {
  std::vector<LyapunovEstimate> v(3);
  for (auto& e : v) e = {1.0, 0.01};
  EXPECT_TRUE(pairwise_agree(v));
  v[2].value = 1.1;
  EXPECT_FALSE(pairwise_agree(v));
}

TEST(EpsHat, ZeroForExactLogD) {
  std::vector<LyapunovEstimate> v(2);
  for (auto& e : v) e = {std::log(16.0), 0.0};
  EXPECT_NEAR(eps_hat_from(skew(), v), 0.0, 1e-12);
}

TEST(SlowRecurrence, SpanMatchesDirectSum) {
  const std::vector<double> c{1.0, 0.5, 0.01, 0.2};
  EXPECT_NEAR(slow_recurrence_stat(c, 0.1), -std::log(0.01) / 4.0, 1e-15);
}

TEST(Stats, PercentileAndFit) {
  EXPECT_DOUBLE_EQ(percentile({3.0, 1.0, 2.0}, 50.0), 2.0);
  EXPECT_DOUBLE_EQ(percentile({0.0, 10.0}, 25.0), 2.5);
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-14);
}
