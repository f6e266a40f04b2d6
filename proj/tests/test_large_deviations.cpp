#include <gtest/gtest.h>

#include <cmath>

#include "viana/large_deviations.hpp"
#include "viana/system.hpp"

using namespace viana;

namespace {

const SystemParams& skew() {
  static const SystemParams sp = default_params();
  return sp;
}

ConstraintSet slab(const Potential& obs, double lo, double hi) { return {{{obs, lo, hi}}, "test"}; }

std::vector<DeviationPoint> synthetic(double rate, double intercept) {
  std::vector<DeviationPoint> v;
  for (std::size_t n : {10, 20, 30, 40, 50}) {
    DeviationPoint d;
    d.n = n;
    d.seeds = 1000;
    d.hits = 1;
    d.p = std::exp(intercept + rate * static_cast<double>(n));
    v.push_back(d);
  }
  return v;
}

RateCandidate cand(std::string name, double mean, double entropy, double integral = 0.0) {
  return {std::move(name), {mean}, entropy, integral};
}

}  // namespace

TEST(EmpiricalMeasure, ConservesMass) {
  Rng g = make_rng(1, "mass");
  for (std::size_t n : {1, 7, 1000}) {
    const auto h = empirical_measure(skew(), random_tracked(skew(), g), n, 16, 16);
    EXPECT_NEAR(h.total(), 1.0, 1e-12);
  }
}

TEST(EmpiricalMeasure, FixedPointIsOneCell) {
  const auto pp = find_periodic_points(skew(), 1);
  ASSERT_FALSE(pp.points.empty());
  const auto h = empirical_measure(skew(), track(skew(), pp.points[0]), 8, 32, 32);
  EXPECT_EQ(h.support(), 1u);
  EXPECT_NEAR(h.weights[h.cell(pp.points[0])], 1.0, 1e-12);
}

TEST(EmpiricalMeasure, BaseMarginalNearLebesgue) {
  Rng g = make_rng(2, "tv");
  const auto h = empirical_measure(skew(), srb_sample(skew(), g), 100000, 32, 8);
  EXPECT_LT(tv_distance(h.theta_marginal(), std::vector<double>(32, 1.0 / 32.0)), 0.05);
}

TEST(EmpiricalMeasure, RejectsEmptyHorizon) {
  Rng g = make_rng(3, "empty");
  EXPECT_THROW(empirical_measure(skew(), random_tracked(skew(), g), 0, 4, 4), ContractError);
}

TEST(DeviationProbabilities, NestedSetsMonotone) {
  const auto obs = cos_potential(1.0);
  const std::vector<ConstraintSet> sets{slab(obs, -kInf, -0.3), slab(obs, -kInf, -0.1), slab(obs, -kInf, 0.1)};
  const auto p = deviation_probabilities(skew(), sets, {10, 20, 30}, 2000, 4);
  for (std::size_t gi = 0; gi < 3; ++gi) {
    EXPECT_LE(p[0][gi].hits, p[1][gi].hits);
    EXPECT_LE(p[1][gi].hits, p[2][gi].hits);
  }
}

TEST(DeviationProbabilities, VacuousAndEmptySets) {
  const auto obs = cos_potential(1.0);
  const std::vector<ConstraintSet> sets{slab(obs, -kInf, kInf), slab(obs, 5.0, 6.0)};
  const auto p = deviation_probabilities(skew(), sets, {10, 20}, 500, 5);
  for (const auto& d : p[0]) {
    EXPECT_EQ(d.p, 1.0);
    EXPECT_FALSE(d.bound_only);
  }
  for (const auto& d : p[1]) {
    EXPECT_TRUE(d.bound_only);
    EXPECT_DOUBLE_EQ(d.p, 3.0 / 500.0);
  }
}

TEST(DeviationProbabilities, IndependentOfThreadCount) {
  const std::vector<ConstraintSet> sets{slab(cos_potential(1.0), -kInf, -0.1)};
  const auto a = deviation_probabilities(skew(), sets, {10, 20}, 1000, 6, 1);
  const auto b = deviation_probabilities(skew(), sets, {10, 20}, 1000, 6, 4);
  for (std::size_t gi = 0; gi < 2; ++gi) EXPECT_EQ(a[0][gi].hits, b[0][gi].hits);
}

TEST(DecayFit, SyntheticSlopeExact) {
  const auto f = decay_rate_fit(synthetic(-0.3, -1.0));
  EXPECT_NEAR(f.rate, -0.3, 1e-6);
  EXPECT_NEAR(f.intercept, -1.0, 1e-6);
  EXPECT_NEAR(f.residual, 0.0, 1e-6);
  EXPECT_FALSE(f.upper_bound);
}

TEST(DecayFit, ConstantProbabilityGivesZero) { EXPECT_NEAR(decay_rate_fit(synthetic(0.0, -2.0)).rate, 0.0, 1e-12); }

TEST(DecayFit, TooFewPointsThrow) {
  auto v = synthetic(-0.3, 0.0);
  v.resize(3);
  EXPECT_THROW(decay_rate_fit(v), NumericError);
}

TEST(RateBound, ConvexCombinationReachesSet) {
  const ConstraintSet A = slab(cos_potential(1.0), 1.5, kInf);
  const auto rb = rate_upper_bound(A, {cand("u", 0.0, 1.0), cand("v", 2.0, 0.0)}, 0.5);
  EXPECT_NEAR(rb.bound, 0.25 - 0.5, 1e-12);
  EXPECT_EQ(rb.best, "u + v");
}

TEST(RateBound, BestSingleCandidate) {
  const ConstraintSet A = slab(cos_potential(1.0), -kInf, 0.0);
  const auto rb = rate_upper_bound(A, {cand("a", -0.5, 0.2, 0.1), cand("b", -0.1, 0.4), cand("c", 0.5, 2.0)}, 1.0);
  // a + c at weight 1/2 beats b + c at weight 5/6
  EXPECT_NEAR(rb.bound, 0.5 * 0.3 + 0.5 * 2.0 - 1.0, 1e-12);
  EXPECT_EQ(rb.best, "a + c");
  const auto only = rate_upper_bound(A, {cand("a", -0.5, 0.2, 0.1)}, 1.0);
  EXPECT_NEAR(only.bound, 0.3 - 1.0, 1e-12);
  EXPECT_EQ(only.best, "a");
}

TEST(RateBound, EmptyFeasibleSetGivesMinusInfinity) {
  const ConstraintSet A = slab(cos_potential(1.0), 5.0, 6.0);
  const auto rb = rate_upper_bound(A, {cand("a", 0.0, 1.0), cand("b", 1.0, 1.0)}, 0.0);
  EXPECT_EQ(rb.bound, -kInf);
  EXPECT_NEAR(rb.nearest_mean_gap, 4.0, 1e-12);
}

TEST(Ldp, DefaultScenarioPasses) {
  LdpBudget b;
  b.seeds = 10000;
  b.tree.end_points = 512;
  const auto sc = default_ldp_scenarios(skew(), b, 7);
  ASSERT_EQ(sc.size(), 2u);
  const auto rep = ldp_check(skew(), sc[1], 0.1);
  EXPECT_TRUE(rep.pass) << rep.final().fit.rate << " vs " << rep.final().bound.bound;
  EXPECT_LT(rep.final().fit.rate, 0.0);
}
