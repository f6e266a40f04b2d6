#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "viana/decomposition.hpp"
#include "viana/potential.hpp"
#include "viana/system.hpp"

using namespace viana;

namespace {

const SystemParams& skew() {
  static const SystemParams sp = default_params();
  return sp;
}

constexpr double kR = 0.2440415187540235;

std::vector<double> random_psi(Rng& g, std::size_t n, int kind) {
  std::vector<double> psi(n);
  if (kind == 0) {
    TrackedPoint x = srb_sample(skew(), g, 100);
    for (auto& v : psi) {
      v = std::log(2.0 * std::abs(x.t));
      step(skew(), x);
    }
  } else {
    for (auto& v : psi) v = uniform(g, -2.0, 1.5);
    if (kind == 2) psi[uniform_index(g, n)] = -kInf;
  }
  return psi;
}

}  // namespace

TEST(Decompose, MatchesExhaustiveOracle) {
  for (int i = 0; i < 1000; ++i) {
    Rng g = make_rng(1, "decomp", i);
    const std::size_t n = 1 + uniform_index(g, 200);
    const auto psi = random_psi(g, n, i % 3);
    const auto d = decompose(psi, n, kR);
    const auto o = oracle::decompose(psi, n, kR);
    EXPECT_EQ(d.p, 0u);
    EXPECT_EQ(d.g, o.g) << "sequence " << i;
    EXPECT_EQ(d.s, o.s) << "sequence " << i;
    EXPECT_EQ(d.p + d.g + d.s, n);
    EXPECT_EQ(in_G(psi, n, kR), oracle::in_G(psi, n, kR)) << "sequence " << i;
    EXPECT_TRUE(in_G(psi, d.g, kR));
    if (d.s > 0) {
      EXPECT_LT(oracle::window_sum(psi, d.g, n, kR), 0.0);
    }
  }
}

TEST(Decompose, TrivialCases) {
  const std::vector<double> good(10, 1.0), bad(10, -1.0);
  const auto a = decompose(good, 10, 0.5);
  EXPECT_EQ(a.g, 10u);
  EXPECT_EQ(a.s, 0u);
  const auto b = decompose(bad, 10, 0.5);
  EXPECT_EQ(b.g, 0u);
  EXPECT_EQ(b.s, 10u);
  const auto c = decompose(good, 0, 0.5);
  EXPECT_EQ(c.g + c.s, 0u);
  EXPECT_TRUE(in_G(good, 0, 0.5));
  EXPECT_FALSE(in_S(good, 0, 0.5));
}

TEST(Decompose, CriticalHitIsBad) {
  std::vector<double> psi(10, 1.0);
  psi[3] = -kInf;
  EXPECT_FALSE(in_G(psi, 10, 0.1));
  EXPECT_TRUE(in_S(psi, 10, 0.1));
  const auto d = decompose(psi, 10, 0.1);
  EXPECT_EQ(d.g, 0u);
  EXPECT_EQ(d.s, 10u);
}

TEST(Decompose, RejectsLengthBeyondSequence) {
  const std::vector<double> psi(3, 1.0);
  EXPECT_THROW(decompose(psi, 4, 0.1), ContractError);
  EXPECT_THROW(in_G(psi, 4, 0.1), ContractError);
}

TEST(BackwardContraction, NoViolationsOnGoodSegments) {
  std::size_t pairs = 0, violations = 0;
  Rng g = make_rng(2, "good");
  for (int i = 0; pairs < 100 && i < 400; ++i) {
    const auto seg = sample_good_segment(skew(), kR, 80, 2, g);
    if (!seg) continue;
    const auto rep = backward_contraction_check(skew(), *seg, seg->size(), kR, 0.05, 0.05, 1, derive_seed(3, "bc", i));
    ASSERT_TRUE(rep.in_g);
    pairs += rep.tested;
    violations += rep.violations;
    EXPECT_LT(rep.max_defect, 1e-12);
  }
  EXPECT_GE(pairs, 100u);
  EXPECT_EQ(violations, 0u);
}

TEST(BackwardContraction, OutsideGIsNotTested) {
  Rng g = make_rng(4, "bad");
  for (int i = 0; i < 200; ++i) {
    const auto seg = make_segment(skew(), srb_sample(skew(), g, 100), 30);
    if (in_G(seg.psi, 30, kR)) continue;
    const auto rep = backward_contraction_check(skew(), seg, 30, kR, 0.05, 0.05, 5, 5);
    EXPECT_FALSE(rep.in_g);
    EXPECT_EQ(rep.tested, 0u);
    return;
  }
  FAIL() << "no segment outside G";
}
