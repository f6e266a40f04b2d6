#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "viana/system.hpp"
#include "viana/tracked.hpp"

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

Point random_point(const SystemParams& sp, Rng& g) { return {uniform01(g), uniform(g, sp.trap_lo, sp.trap_hi)}; }
}  // namespace

TEST(Jacobian, MatchesFiniteDifferencesSkew) {
  Rng g = make_rng(1, "fd");
  for (int i = 0; i < 10000; ++i) {
    const Point p = random_point(skew(), g);
    const Jacobian a = jacobian(skew(), p), f = oracle::finite_difference(skew(), p);
    EXPECT_NEAR(a.m00, f.m00, 1e-5);
    EXPECT_NEAR(a.m01, f.m01, 1e-5);
    EXPECT_NEAR(a.m10, f.m10, 1e-5);
    EXPECT_NEAR(a.m11, f.m11, 1e-5);
  }
}

TEST(Jacobian, MatchesFiniteDifferencesPerturbed) {
  Rng g = make_rng(2, "fd");
  for (int i = 0; i < 2000; ++i) {
    const Point p = random_point(perturbed(), g);
    const Jacobian a = jacobian(perturbed(), p), f = oracle::finite_difference(perturbed(), p);
    EXPECT_NEAR(a.m00, f.m00, 1e-5);
    EXPECT_NEAR(a.m01, f.m01, 1e-5);
    EXPECT_NEAR(a.m10, f.m10, 1e-5);
    EXPECT_NEAR(a.m11, f.m11, 1e-5);
  }
}

TEST(Jacobian, DeterminantOfSkewProductIsBaseTimesFiber) {
  Rng g = make_rng(3, "det");
  for (int i = 0; i < 1000; ++i) {
    const Point p = random_point(skew(), g);
    EXPECT_DOUBLE_EQ(jacobian(skew(), p).det(), -2.0 * p.t * skew().d);
  }
}

TEST(Jacobian, SolveInvertsProduct) {
  Rng g = make_rng(4, "solve");
  for (int i = 0; i < 1000; ++i) {
    const Point p = random_point(perturbed(), g);
    const Jacobian J = jacobian(perturbed(), p);
    const Vec2 v{uniform(g, -1, 1), uniform(g, -1, 1)};
    const auto w = J.solve(J * v);
    ASSERT_TRUE(w);
    EXPECT_NEAR(w->x, v.x, 1e-9);
    EXPECT_NEAR(w->y, v.y, 1e-6);
  }
}

TEST(Jacobian, SkewBaseRowIsExact) {
  Rng g = make_rng(13, "row");
  for (int i = 0; i < 1000; ++i) {
    const Jacobian J = jacobian(skew(), random_point(skew(), g));
    EXPECT_EQ(J.m00, 16.0);
    EXPECT_EQ(J.m01, 0.0);
  }
}

TEST(Jacobian, SingularOnCriticalLine) {
  const Jacobian J = jacobian(skew(), {0.3, 0.0});
  EXPECT_EQ(J.det(), 0.0);
  EXPECT_FALSE(J.solve({1.0, 1.0}));
  EXPECT_EQ(J.inv_norm(), kInf);
}

TEST(Metric, AxiomsOnSamples) {
  Rng g = make_rng(5, "metric");
  for (int i = 0; i < 2000; ++i) {
    const Point a = random_point(skew(), g), b = random_point(skew(), g), c = random_point(skew(), g);
    EXPECT_EQ(dist(a, a), 0.0);
    EXPECT_EQ(dist(a, b), dist(b, a));
    EXPECT_LE(dist(a, c), dist(a, b) + dist(b, c) + 1e-15);
    EXPECT_LE(circle_dist(a.theta, b.theta), 0.5);
  }
  EXPECT_NEAR(dist({0.99, 0.0}, {0.01, 0.0}), 0.02, 1e-15);
}

TEST(Misiurewicz, DefaultParameterSolvesKneadingEquation) {
  const double a = find_misiurewicz_a0(4, 1);
  EXPECT_GT(a, 1.0);
  EXPECT_LT(a, 2.0);
  double t = 0.0, orbit[6];
  for (int i = 0; i < 6; ++i) orbit[i] = t = a - t * t;
  // h^5(0) = h^4(0), orbit index shifted by one
  EXPECT_NEAR(orbit[4], orbit[3], 1e-9);
  for (int i = 0; i < 5; ++i) EXPECT_GT(std::abs(orbit[i]), 1e-4);
  EXPECT_GT(2.0 * std::abs(orbit[3]), 1.0);
}

TEST(Misiurewicz, RootsMatchDenseScan) {
  // Oracle: sign changes of the kneading gap on a finer grid.
  for (auto [k, p] : {std::pair{2, 1}, {3, 1}, {2, 2}}) {
    const auto roots = misiurewicz_roots(k, p);
    std::vector<double> scan;
    double prev = detail::kneading_gap(1.0 + 1e-9, k, p);
    for (int i = 1; i <= 200000; ++i) {
      const double a = 1.0 + i * 5e-6;
      if (a >= 2.0) break;
      const double gcur = detail::kneading_gap(a, k, p);
      if ((prev < 0) != (gcur < 0)) scan.push_back(a);
      prev = gcur;
    }
    for (const auto& r : roots) {
      double best = kInf;
      for (double s : scan) best = std::min(best, std::abs(s - r.a));
      EXPECT_LT(best, 1e-5) << "k=" << k << " p=" << p;
    }
  }
}

TEST(Misiurewicz, DefaultRootMatchesFineScan) {
  // Oracle: sign change of the kneading gap on a 1e-6 grid.
  const double a = find_misiurewicz_a0(4, 1);
  double lo = kNaN;
  double prev = detail::kneading_gap(1.0 + 1e-6, 4, 1);
  for (int i = 2; i < 1000000; ++i) {
    const double x = 1.0 + i * 1e-6;
    const double cur = detail::kneading_gap(x, 4, 1);
    if ((prev < 0) != (cur < 0) && std::abs(x - a) < 2e-6) lo = x;
    prev = cur;
  }
  EXPECT_NEAR(lo, a, 2e-6);
  EXPECT_LT(std::abs(detail::kneading_gap(a, 4, 1)), 1e-10);
}

TEST(Misiurewicz, MissingParameterThrows) { EXPECT_THROW(find_misiurewicz_a0(1, 1), NumericError); }

TEST(Params, RejectsParameterOutsideUnitInterval) {
  EXPECT_THROW(make_params(16, 2.0, 1e-3), ConfigError);
  EXPECT_THROW(make_params(16, 1.0, 1e-3), ConfigError);
  EXPECT_THROW(make_params(1, 1.5, 1e-3), ConfigError);
  EXPECT_THROW(make_params(16, 1.5, -1e-3), ConfigError);
  EXPECT_NO_THROW(make_params(16, 1.5, 0.0));
}

TEST(TrappingInterval, ForwardInvariant) {
  for (const SystemParams* sp : {&skew(), &perturbed()}) {
    Rng g = make_rng(6, "trap");
    for (int i = 0; i < 20000; ++i) {
      const Point q = apply(*sp, random_point(*sp, g));
      EXPECT_GT(q.t, sp->trap_lo);
      EXPECT_LT(q.t, sp->trap_hi);
    }
  }
}

TEST(Preimages, MapBackOntoTarget) {
  Rng g = make_rng(7, "pre");
  for (const SystemParams* sp : {&skew(), &perturbed()}) {
    for (int i = 0; i < 300; ++i) {
      const Point target = apply(*sp, random_point(*sp, g));
      const auto pre = inverse_branches(*sp, target);
      EXPECT_FALSE(pre.empty());
      for (const auto& y : pre) EXPECT_LT(dist(apply(*sp, y), target), 1e-12);
    }
  }
}

TEST(Preimages, DoubleRootWithoutCoupling) {
  const SystemParams sp = make_params(16, find_misiurewicz_a0(4, 1), 0.0);
  const auto pre = inverse_branches(sp, {0.3, sp.a0});
  ASSERT_EQ(pre.size(), 16u);
  for (const auto& y : pre) EXPECT_EQ(y.t, 0.0);
}

TEST(TruncatedDistance, Examples) {
  const auto& sp = skew();
  const double th = 0.37;
  const double tc = critical_height(sp, th);
  EXPECT_EQ(trunc_dist(sp, {th, tc + 0.5}, 0.1), 1.0);
  EXPECT_NEAR(trunc_dist(sp, {th, tc + 0.05}, 0.1), 0.05, 1e-12);
  EXPECT_EQ(trunc_dist(sp, {th, tc + 0.05}, 1e-300), 1.0);
}

TEST(Preimages, InteriorTargetHasTwoPerBaseBranch) {
  const Point target{0.4, 0.5};
  EXPECT_EQ(inverse_branches(skew(), target).size(), 32u);
}

TEST(PeriodicPoints, FixedPointsMatchClosedForm) {
  // Oracle: base fixed points j/(d-1); fiber root of t^2 + t - (a0 + alpha sin) = 0 inside I.
  const auto& sp = skew();
  const auto pp = find_periodic_points(sp, 1);
  std::size_t expected = 0;
  for (int j = 0; j < sp.d - 1; ++j) {
    const double th = static_cast<double>(j) / (sp.d - 1);
    const double c = sp.a0 + sp.alpha * std::sin(kTwoPi * th);
    for (double t : {(-1.0 + std::sqrt(1.0 + 4.0 * c)) / 2.0, (-1.0 - std::sqrt(1.0 + 4.0 * c)) / 2.0}) {
      if (!in_interval(sp, t)) continue;
      ++expected;
      bool found = false;
      for (const auto& p : pp.points) found = found || dist(p, {th, t}) < 1e-9;
      EXPECT_TRUE(found) << th << " " << t;
    }
  }
  EXPECT_EQ(pp.points.size(), expected);
}

TEST(PeriodicPoints, UncoupledFixedPointsMatchGridScan) {
  // Oracle: sign changes of a0 - t^2 - t on a fine t grid, times the d - 1 base fixed points.
  const SystemParams sp = make_params(16, find_misiurewicz_a0(4, 1), 0.0);
  std::size_t roots = 0;
  const int M = 4000;
  double prev = sp.a0 - sp.trap_lo * sp.trap_lo - sp.trap_lo;
  for (int i = 1; i <= M; ++i) {
    const double t = sp.trap_lo + (sp.trap_hi - sp.trap_lo) * i / M;
    const double cur = sp.a0 - t * t - t;
    roots += (prev < 0) != (cur < 0);
    prev = cur;
  }
  const auto pp = find_periodic_points(sp, 1);
  EXPECT_EQ(pp.points.size(), roots * 15);
  const double tstar = (-1.0 + std::sqrt(1.0 + 4.0 * sp.a0)) / 2.0;
  bool found = false;
  for (const auto& p : pp.points) found = found || dist(p, {0.0, tstar}) < 1e-9;
  EXPECT_TRUE(found);
}

TEST(PeriodicPoints, PeriodTwoPointsReturn) {
  const auto pp = find_periodic_points(skew(), 2);
  EXPECT_GT(pp.points.size(), 15u);
  for (const auto& p : pp.points) EXPECT_LT(dist(apply(skew(), apply(skew(), p)), p), 1e-9);
}

TEST(CriticalBehavior, NoViolationsWithDefaultConstants) {
  const auto r = critical_behavior_check(skew(), 32.0, 1.0, 10000, 8);
  EXPECT_TRUE(r.ok()) << r.violations_norm << " " << r.violations_inv_norm << " " << r.violations_det;
}

TEST(BaseCode, ShiftTracksMultiplication) {
  Rng g = make_rng(9, "code");
  TrackedPoint x = random_tracked(skew(), g);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Point q = apply(skew(), x.point());
    step(skew(), x);
    worst = std::max(worst, dist(q, x.point()));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(BaseCode, PrependInvertsShift) {
  Rng g = make_rng(10, "code");
  for (int i = 0; i < 200; ++i) {
    BaseCode c = BaseCode::from_theta(16, uniform01(g), g());
    const int j = static_cast<int>(uniform_index(g, 16));
    BaseCode d = c;
    d.prepend(j);
    EXPECT_EQ(d.digit(0), j);
    EXPECT_NEAR(d.theta(), (c.theta() + j) / 16.0, 1e-15);
    d.shift();
    EXPECT_EQ(d.theta(), c.theta());
  }
}

TEST(BaseCode, FromThetaReproducesCoordinate) {
  Rng g = make_rng(11, "code");
  for (int i = 0; i < 1000; ++i) {
    const double th = uniform01(g);
    EXPECT_NEAR(BaseCode::from_theta(16, th, 1).theta(), th, 1e-15);
  }
}

TEST(Tracked, PullbackIsPreimage) {
  Rng g = make_rng(12, "pull");
  for (int i = 0; i < 500; ++i) {
    TrackedPoint x = random_tracked(skew(), g);
    step(skew(), x);
    const int j = static_cast<int>(uniform_index(g, 16));
    const auto y = pullback(skew(), x, j, 1);
    if (!y) continue;
    TrackedPoint z = *y;
    step(skew(), z);
    EXPECT_LT(dist(z.point(), x.point()), 1e-14);
    TrackedPoint w = x;
    ASSERT_TRUE(pullback_inplace(skew(), w, j, 1));
    EXPECT_EQ(w.theta, y->theta);
    EXPECT_EQ(w.t, y->t);
  }
}
