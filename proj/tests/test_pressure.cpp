#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "viana/potential.hpp"
#include "viana/pressure.hpp"
#include "viana/system.hpp"

using namespace viana;

namespace {

const SystemParams& skew() {
  static const SystemParams sp = default_params();
  return sp;
}

SegmentCloud random_cloud(Rng& g, std::size_t m, std::size_t n) {
  SegmentCloud c;
  c.n = n;
  for (std::size_t i = 0; i < m; ++i) {
    TrackedPoint x = track(skew(), {uniform01(g), uniform(g, -1.5, 1.5)}, i);
    std::vector<Point> orbit;
    for (std::size_t k = 0; k < n; ++k) {
      orbit.push_back(x.point());
      step(skew(), x);
    }
    c.orbits.push_back(orbit);
    c.weights.push_back(uniform(g, -3.0, 3.0));
  }
  return c;
}
}  // namespace

TEST(Pressure, BaseOnlyEntropyIsLogD) {
  TreeBudget b;
  b.base_only = true;
  const auto est = pressure_estimate(skew(), constant_potential(0.0), {}, b);
  EXPECT_NEAR(est.value, std::log(16.0), 0.05 * std::log(16.0));
}

TEST(Pressure, ConstantShiftIsExact) {
  TreeBudget b;
  b.end_points = 256;
  const auto p0 = pressure_estimate(skew(), cos_potential(0.1), {}, b);
  Potential shifted = cos_potential(0.1);
  shifted.fn = [](const Point& p) { return 0.1 * std::cos(kTwoPi * p.theta) + 1.0; };
  const auto p1 = pressure_estimate(skew(), shifted, {}, b);
  EXPECT_NEAR(p1.value - p0.value, 1.0, 1e-12);
}

TEST(Pressure, MonotoneInPotential) {
  TreeBudget b;
  b.end_points = 256;
  const auto lo = pressure_estimate(skew(), constant_potential(0.0), {}, b);
  const auto hi = pressure_estimate(skew(), cos_potential(0.1), {}, b);
  EXPECT_GE(hi.value + 0.1, lo.value);
  EXPECT_LE(hi.value - 0.1, lo.value);
}

TEST(Pressure, BadCollectionBelowAll) {
  TreeBudget b;
  b.end_points = 256;
  const auto gap = pressure_gap_S(skew(), constant_potential(0.0), 0.24, b);
  EXPECT_FALSE(gap.s_empty);
  EXPECT_GT(gap.gap, 0.0);
}

TEST(Pressure, RejectsBadBudget) {
  TreeBudget b;
  b.n_hi = b.n_lo;
  EXPECT_THROW(pressure_estimate(skew(), constant_potential(0.0), {}, b), ContractError);
}

TEST(Pressure, DeterministicForSeed) {
  TreeBudget b;
  b.end_points = 128;
  const auto a = pressure_estimate(skew(), cos_potential(0.1), {}, b);
  const auto c = pressure_estimate(skew(), cos_potential(0.1), {}, b);
  EXPECT_EQ(a.value, c.value);
}

TEST(PartitionSum, MatchesExhaustiveOnSmallClouds) {
  for (int i = 0; i < 200; ++i) {
    Rng g = make_rng(1, "cloud", i);
    const std::size_t m = 1 + uniform_index(g, 12);
    const auto c = random_cloud(g, m, 1 + uniform_index(g, 4));
    const double eps = uniform(g, 0.05, 0.6);
    const auto ps = partition_sum(c, eps);
    EXPECT_TRUE(ps.exact);
    EXPECT_NEAR(ps.log_value, oracle::partition_sum(c, eps), 1e-12) << "cloud " << i;
  }
}

TEST(PartitionSum, EmptyCloud) { EXPECT_EQ(partition_sum(SegmentCloud{}, 0.1).log_value, -kInf); }

TEST(SeparatedSet, SeparatedAndMaximal) {
  Rng g = make_rng(2, "sep");
  const auto c = random_cloud(g, 200, 3);
  for (auto strategy : {SeparationStrategy::greedy_weight, SeparationStrategy::farthest_point}) {
    const auto s = separated_set(c, 0.2, strategy);
    for (std::size_t a = 0; a < s.size(); ++a) {
      for (std::size_t b = a + 1; b < s.size(); ++b) EXPECT_GE(bowen_dist(c.orbits[s[a]], c.orbits[s[b]], 3), 0.2);
    }
    for (std::size_t i = 0; i < c.orbits.size(); ++i) {
      double nearest = kInf;
      for (auto j : s) nearest = std::min(nearest, bowen_dist(c.orbits[i], c.orbits[j], 3));
      EXPECT_LT(nearest, 0.2);
    }
  }
}

TEST(MeasurePressure, FixedPointHasZeroEntropy) {
  const auto pp = find_periodic_points(skew(), 1);
  ASSERT_FALSE(pp.points.empty());
  const std::vector<Point> orbit(500, pp.points[0]);
  const auto m = measure_pressure_proxy(orbit, cos_potential(0.1), 0.05, 5, 50, 3);
  EXPECT_NEAR(m.entropy, 0.0, 1e-12);
  EXPECT_NEAR(m.integral, 0.1 * std::cos(kTwoPi * pp.points[0].theta), 1e-12);
}
