#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "viana/hyperbolic.hpp"

namespace viana {

inline constexpr double kDistinctFloor = 1e-6;

struct GammaCompanion {
  Point y;                     // y_0
  double initial_dist = 0.0;   // dist(x_0, y_0)
  double max_dist = 0.0;       // max_k dist(x_k, y_k)
  std::size_t fold_step = 0;   // y_{k+1} = x_{k+1} from this k on; N for same-branch companions
  bool fold = false;
};

struct GammaBallReport {
  Point center;
  double eps = 0.0;
  std::size_t N = 0;
  std::vector<GammaCompanion> companions;
  std::vector<double> diameter_curve;  // index k = 0..N
  double max_defect = 0.0;
  std::size_t tried = 0;
  bool partial = false;
};

namespace detail {

inline bool record_companion(const OrbitSegment& seg, const std::vector<Point>& chain, double eps, GammaBallReport& rep,
                             GammaCompanion c) {
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const Point& xk = k < seg.size() ? seg.points[k] : seg.end.point();
    const double dk = dist(chain[k], xk);
    if (!(dk < eps)) return false;
    c.max_dist = std::max(c.max_dist, dk);
  }
  c.y = chain.front();
  c.initial_dist = dist(chain.front(), seg.points.front());
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const Point& xk = k < seg.size() ? seg.points[k] : seg.end.point();
    rep.diameter_curve[k] = std::max(rep.diameter_curve[k], dist(chain[k], xk));
  }
  rep.companions.push_back(c);
  return true;
}

}  // namespace detail

// Finite-horizon Gamma_eps(x): pullbacks of B(f^N x, eps) along x's branches,
// plus fold companions that cross the critical curve at some k < N and share
// x's orbit afterwards.  Every chain has one-step defect <= 1e-12.
inline GammaBallReport gamma_ball(const SystemParams& sp, const TrackedPoint& x, double eps, std::size_t N,
                                  std::size_t budget, std::uint64_t seed) {
  require(eps > 0.0 && N >= 1, "gamma_ball: need eps > 0 and N >= 1");
  GammaBallReport rep;
  rep.center = x.point();
  rep.eps = eps;
  rep.N = N;
  rep.diameter_curve.assign(N + 1, 0.0);
  const auto seg = make_segment(sp, x, N);
  Rng g = make_rng(seed, "gamma_ball");
  const Point xN = seg.end.point();
  const std::size_t own = budget / 2 + 1;
  for (std::size_t i = 0; i < own; ++i) {
    ++rep.tried;
    const auto yN = offset_tracked(sp, xN, uniform(g, -eps, eps), uniform(g, -eps, eps), g());
    const auto chain = pull_along(sp, seg, yN, N);
    if (chain.empty()) continue;
    const double e = chain_defect(sp, chain);
    if (e > 1e-12) continue;
    if (detail::record_companion(seg, chain, eps, rep, {{}, 0.0, 0.0, N, false})) rep.max_defect = std::max(rep.max_defect, e);
  }
  TrackedPoint xt = x;
  for (std::size_t k = 0; k < N; ++k) {
    const Point& xk = seg.points[k];
    if (std::abs(xk.t) < 0.5 * eps && xk.t != 0.0) {
      if (rep.tried >= budget + own) {
        rep.partial = true;
        break;
      }
      ++rep.tried;
      TrackedPoint yk = xt;
      if (sp.perturbed()) {
        const Point fx = k + 1 < seg.size() ? seg.points[k + 1] : seg.end.point();
        const auto y = detail::newton_preimage(sp, fx, {xk.theta, -xk.t});
        if (!y || dist(*y, xk) < kDistinctFloor * eps) continue;
        yk = track(sp, *y, g());
      } else {
        yk.t = -xk.t;
      }
      const auto chain = pull_along(sp, seg, yk, k);
      if (chain.empty()) continue;
      const double e = std::max(chain_defect(sp, chain), dist(apply(sp, chain.back()), apply(sp, xk)));
      if (e > 1e-12) continue;
      if (detail::record_companion(seg, chain, eps, rep, {{}, 0.0, 0.0, k, true})) rep.max_defect = std::max(rep.max_defect, e);
    }
    step(sp, xt);
  }
  return rep;
}

struct NonExpansivePair {
  Point x, y;
  double initial_dist = 0.0;
  double max_dist = 0.0;  // over 0 <= k <= N
  std::size_t merge_step = 0;
};

struct NonExpansiveReport {
  std::vector<NonExpansivePair> pairs;
  std::size_t tried = 0;
  double best_near_miss = kInf;  // smallest max_dist among rejected candidates
  bool found() const { return !pairs.empty(); }
};

// Distinct pairs (dist >= 1e-6) whose orbits stay eps-close up to N.
// Skew mode: (theta, t) and (theta, -t) share every forward image, checked by
// replay.  Perturbed mode: fold companions of points near the critical curve.
inline NonExpansiveReport nonexpansive_search(const SystemParams& sp, double eps, std::size_t N, std::size_t budget,
                                              std::uint64_t seed, std::size_t want = 1) {
  NonExpansiveReport rep;
  Rng g = make_rng(seed, "nonexpansive");
  while (rep.tried < budget && rep.pairs.size() < want) {
    ++rep.tried;
    if (!sp.perturbed()) {
      TrackedPoint x = random_tracked(sp, g);
      x.t = uniform(g, 0.5 * kDistinctFloor, 0.5 * std::min(eps, 1.0));
      TrackedPoint y = x;
      y.t = -x.t;
      NonExpansivePair pr{x.point(), y.point(), dist(x.point(), y.point()), 0.0, 0};
      bool merged = false;
      for (std::size_t k = 0; k <= N; ++k) {
        const double dk = dist(x.point(), y.point());
        pr.max_dist = std::max(pr.max_dist, dk);
        if (!merged && dk == 0.0) {
          merged = true;
          pr.merge_step = k;
        }
        if (k < N) {
          step(sp, x);
          step(sp, y);
        }
      }
      if (merged && pr.max_dist < eps && pr.initial_dist >= kDistinctFloor) {
        rep.pairs.push_back(pr);
      } else {
        rep.best_near_miss = std::min(rep.best_near_miss, pr.max_dist);
      }
      continue;
    }
    const double th = uniform01(g);
    const Point c{th, critical_height(sp, th)};
    const double h = uniform(g, 0.05, 0.45) * eps;
    const Point y0{th, c.t + h};
    const auto z0 = detail::newton_preimage(sp, apply(sp, y0), {th, c.t - h});
    if (!z0) continue;
    const double d0 = dist(y0, *z0);
    const double merge = dist(apply(sp, y0), apply(sp, *z0));
    if (d0 >= kDistinctFloor && d0 < eps && merge <= 1e-12) {
      rep.pairs.push_back({y0, *z0, d0, d0, 1});
    } else {
      rep.best_near_miss = std::min(rep.best_near_miss, d0);
    }
  }
  return rep;
}

struct GammaDecay {
  std::vector<std::size_t> times;
  std::vector<double> diameters;  // max dist(x_0, y_0) over same-branch companions surviving to n
  std::vector<double> bounds;     // sigma^{n/2} eps
  std::size_t companions = 0;
  std::size_t violations = 0;
  std::size_t fold_companions = 0;  // distinct companions crossing the critical curve
  std::size_t last_time = 0;
  double lambda_c_proxy = kNaN;   // mean psi^c along the segment
  bool member = false;            // has hyperbolic times
  bool collapsed = false;         // same-branch Gamma empty beyond the last hyperbolic time
  std::string status;
};

// Same-branch companions at sampled hyperbolic times n_i must satisfy
// dist(x, y) <= sigma^{n_i/2} eps; collapse means the last diameter is below
// the distinctness floor.
inline GammaDecay gamma_decay_at_hyperbolic_times(const SystemParams& sp, const TrackedPoint& x, double eps,
                                                  std::size_t N, const HypParams& hp, std::size_t max_times,
                                                  std::size_t companions, std::uint64_t seed) {
  GammaDecay out;
  const auto seg = make_segment(sp, x, N);
  out.lambda_c_proxy = mean(seg.psi);
  const auto rep = hyperbolic_times(sp, seg, hp);
  if (rep.times.empty()) {
    out.status = "no hyperbolic times";
    return out;
  }
  out.member = true;
  out.last_time = rep.times.back();
  std::vector<std::size_t> pick;
  const std::size_t T = rep.times.size();
  const std::size_t m = std::max<std::size_t>(1, std::min(max_times, T));
  for (std::size_t i = 0; i < m; ++i) pick.push_back(rep.times[m == 1 ? T - 1 : i * (T - 1) / (m - 1)]);
  pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
  Rng g = make_rng(seed, "gamma_decay");
  for (std::size_t n : pick) {
    const Point xn = n < seg.size() ? seg.points[n] : seg.end.point();
    double diam = 0.0;
    for (std::size_t c = 0; c < companions; ++c) {
      const auto yn = offset_tracked(sp, xn, uniform(g, -eps, eps), uniform(g, -eps, eps), g());
      const auto chain = pull_along(sp, seg, yn, n);
      if (chain.empty()) continue;
      bool inside = true;
      for (std::size_t k = 0; k < n && inside; ++k) inside = dist(chain[k], seg.points[k]) < eps;
      if (!inside) continue;
      ++out.companions;
      diam = std::max(diam, dist(chain[0], seg.points[0]));
    }
    const double bound = std::exp(0.5 * std::log(hp.sigma) * static_cast<double>(n)) * eps;
    out.times.push_back(n);
    out.diameters.push_back(diam);
    out.bounds.push_back(bound);
    if (diam > bound + 1e-12) ++out.violations;
  }
  for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
    const Point& xk = seg.points[k];
    if (std::abs(xk.t) < 0.5 * eps && xk.t != 0.0) ++out.fold_companions;
  }
  out.collapsed = out.violations == 0 && out.diameters.back() < kDistinctFloor;
  out.status = out.collapsed ? "empty Gamma beyond horizon" : "companions persist";
  return out;
}

}  // namespace viana
