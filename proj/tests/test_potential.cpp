#include <gtest/gtest.h>

#include <cmath>

#include "viana/potential.hpp"
#include "viana/system.hpp"

using namespace viana;

namespace {

SystemParams calibrated() {
  SystemParams sp = default_params();
  sp.constants.c0_estimate = 0.48808303750804699;
  sp.constants.eps_hat = 8.3661078065233596e-11;
  return sp;
}

}  // namespace

TEST(Holder, BuiltinsSatisfyDeclaredConstants) {
  const auto sp = calibrated();
  for (const auto& phi : {constant_potential(1.0), cos_potential(0.1), linear_t_potential(0.3)}) {
    EXPECT_TRUE(holder_check(sp, phi, 20000, 1).ok) << phi.name;
  }
}

TEST(Holder, UnderstatedConstantRejected) {
  const auto sp = calibrated();
  EXPECT_THROW(make_potential(sp, "steep", [](const Point& p) { return 5.0 * p.t; }, 1.0, 1.0), ConfigError);
  EXPECT_THROW(make_potential(sp, "bad_alpha", [](const Point&) { return 0.0; }, 1.0, 1.5), ConfigError);
  EXPECT_NO_THROW(make_potential(sp, "ok", [](const Point& p) { return 0.5 * p.t; }, 0.5, 1.0));
}

TEST(Holder, SqrtPotentialNeedsExponentHalf) {
  const auto sp = calibrated();
  auto fn = [](const Point& p) { return std::sqrt(std::abs(p.t)); };
  EXPECT_NO_THROW(make_potential(sp, "sqrt", fn, 1.0, 0.5));
  EXPECT_THROW(make_potential(sp, "sqrt", fn, 1.0, 1.0), ConfigError);
}

TEST(Oscillation, CosineAmplitude) {
  const auto sp = calibrated();
  EXPECT_NEAR(oscillation(sp, cos_potential(0.1)).value, 0.2, 1e-12);
  EXPECT_EQ(oscillation(sp, constant_potential(3.0)).value, 0.0);
  const auto lin = oscillation(sp, linear_t_potential(1.0), 1e-2);
  EXPECT_NEAR(lin.value, sp.trap_hi - sp.trap_lo, 1e-12);
}

TEST(Oscillation, SentinelsCounted) {
  const auto sp = calibrated();
  const auto o = oscillation(sp, truncated_psi_potential(1.0, -4.0));
  EXPECT_EQ(o.sentinels, 0u);
  Potential raw{"raw", [](const Point& p) { return std::sqrt(p.t); }, 1.0, 0.5, false};
  const auto r = oscillation(sp, raw, 0.01);
  EXPECT_GT(r.sentinels, 0u);
  EXPECT_NEAR(r.value, std::sqrt(sp.trap_hi), r.refinement_bound);
}

TEST(Admissibility, SmallCosineAdmissibleLargeRejected) {
  const auto sp = calibrated();
  const auto a = admissible(sp, cos_potential(0.1));
  EXPECT_TRUE(a.admissible);
  EXPECT_NEAR(a.threshold, 0.5 * 0.48808303750804699, 1e-9);
  EXPECT_FALSE(admissible(sp, cos_potential(1.0)).admissible);
}

TEST(Admissibility, RequiresCalibration) {
  EXPECT_THROW(admissible(default_params(), cos_potential(0.1)), ContractError);
}

TEST(Birkhoff, SumOfValues) {
  const std::vector<Point> pts{{0.0, 0.0}, {0.25, 0.0}, {0.5, 0.0}};
  EXPECT_NEAR(birkhoff_sum(cos_potential(1.0), pts), 0.0, 1e-15);
}

TEST(Bowen, ConstantPotentialHasZeroDistortion) {
  const auto sp = calibrated();
  const auto rep = bowen_constant_estimate(sp, constant_potential(2.0), 0.244, 0.05, 20, 40, 4, 1);
  EXPECT_GT(rep.companions, 0u);
  EXPECT_EQ(rep.empirical_sup, 0.0);
  EXPECT_EQ(rep.analytic_bound, 0.0);
  EXPECT_TRUE(rep.ok);
}

TEST(Bowen, CosineBelowAnalyticBound) {
  const auto sp = calibrated();
  const auto phi = cos_potential(0.1);
  const auto rep = bowen_constant_estimate(sp, phi, 0.244, 0.05, 100, 80, 4, 2);
  EXPECT_GE(rep.segments, 90u);
  EXPECT_NEAR(rep.analytic_bound, phi.K * 0.05 / (1.0 - std::exp(-0.244)), 1e-12);
  EXPECT_TRUE(rep.ok) << rep.empirical_sup << " vs " << rep.analytic_bound;
}

TEST(GoodSegments, LieInG) {
  const auto sp = calibrated();
  Rng g = make_rng(3, "good");
  for (int i = 0; i < 50; ++i) {
    const auto seg = sample_good_segment(sp, 0.244, 60, 2, g);
    if (!seg) continue;
    double s = 0.0;
    for (std::size_t j = seg->size(); j-- > 0;) {
      s += seg->psi[j] - 0.244;
      EXPECT_GE(s, 0.0);
    }
  }
}
