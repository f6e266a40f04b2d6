#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "viana/tangent.hpp"

namespace viana {

// Orbit point with an extended-precision fiber coordinate.
struct FinePoint {
  BaseCode code;
  long double t = 0.0L;
  Point point() const { return {code.theta(), static_cast<double>(t)}; }
};

inline FinePoint fine(const TrackedPoint& x) {
  require(x.coded, "specification: skew mode only");
  return {x.code, static_cast<long double>(x.t)};
}

inline void fine_step(const SystemParams& sp, FinePoint& x) {
  const long double th = x.code.theta();
  x.t = static_cast<long double>(sp.a0) - x.t * x.t +
        static_cast<long double>(sp.alpha) * std::sin(2.0L * static_cast<long double>(kPi) * th);
  x.code.shift();
}

inline std::optional<FinePoint> fine_pullback(const SystemParams& sp, const FinePoint& x, int j, int s) {
  FinePoint y = x;
  y.code.prepend(j);
  const long double th = y.code.theta();
  const long double rad = static_cast<long double>(sp.a0) +
                          static_cast<long double>(sp.alpha) * std::sin(2.0L * static_cast<long double>(kPi) * th) - x.t;
  if (rad < 0.0L) return std::nullopt;
  y.t = s * std::sqrt(rad);
  return y;
}

namespace detail {

// Base digits (first pullback first) of a depth-m preimage of theta_z near
// theta_c: the nearest one for m <= 13, otherwise the leading 13 digits of
// theta_c followed by zeros; dj shifts the leading block.
inline std::optional<std::vector<int>> steer_digits(int d, int m, double theta_z, double theta_c, long long dj) {
  const int q = std::min(m, 13);
  long double dq = 1.0L;
  for (int i = 0; i < q; ++i) dq *= d;
  if (dq > 0x1.0p62L) return std::nullopt;
  const auto D = static_cast<long long>(dq);
  long long J = q == m ? std::llroundl(static_cast<long double>(theta_c) * dq - static_cast<long double>(theta_z))
                       : static_cast<long long>(std::floor(static_cast<long double>(theta_c) * dq));
  J = ((J + dj) % D + D) % D;
  std::vector<int> digits(m, 0);
  for (int i = m - q; i < m; ++i) {
    digits[i] = static_cast<int>(J % d);
    J /= d;
  }
  return digits;
}

// Depth-m preimages of z landing within eps of c.  The first free_levels
// pullbacks range over all base digits, the rest follow `digits`; fiber
// signs are enumerated.  visit returns true to stop the search.
template <class Visit>
bool fiber_search(const SystemParams& sp, const FinePoint& z, const std::vector<int>& digits, std::size_t depth,
                  const Point& c, double eps, std::size_t& budget, Visit&& visit, std::size_t free_levels = 2) {
  if (budget == 0) return true;
  if (depth == digits.size()) {
    --budget;
    const Point p = z.point();
    return dist(p, c) < eps && visit(z);
  }
  const bool free = depth < free_levels && depth + 2 < digits.size();
  for (int j = free ? 0 : digits[depth]; j < (free ? sp.d : digits[depth] + 1); ++j) {
    for (int s : {1, -1}) {
      auto y = fine_pullback(sp, z, j, s);
      if (!y || !in_interval(sp, static_cast<double>(y->t))) continue;
      if (s == -1 && y->t == 0.0L) continue;
      if (fiber_search(sp, *y, digits, depth + 1, c, eps, budget, visit, free_levels)) return true;
    }
  }
  return false;
}

}  // namespace detail

struct MixingReport {
  int tau = -1;                 // max over centers; -1 if some center exceeded the cap
  std::vector<int> per_center;  // -1 where the cap was hit
  std::size_t cells = 0;
};

// Smallest m with f^m(B(x, eps)) covering every sampled cell of Lambda at the
// given resolution: each cell representative needs a depth-m preimage in B(x, eps).
inline MixingReport mixing_time(const SystemParams& sp, double eps, double resolution, const std::vector<Point>& centers,
                                int cap, std::size_t lambda_samples, std::uint64_t seed) {
  require(!sp.perturbed(), "mixing_time: skew mode only");
  MixingReport rep;
  Rng g = make_rng(seed, "mixing_lambda");
  std::map<std::pair<long, long>, FinePoint> cells;
  TrackedPoint x = srb_sample(sp, g, 100);
  for (std::size_t i = 0; i < lambda_samples; ++i) {
    if (i % 1000 == 0) x = srb_sample(sp, g, 100);
    const Point p = x.point();
    cells.try_emplace({std::lround(std::floor(p.theta / resolution)), std::lround(std::floor(p.t / resolution))}, fine(x));
    step(sp, x);
  }
  rep.cells = cells.size();
  for (const auto& c : centers) {
    int found = -1;
    for (int m = 1; m <= cap && found < 0; ++m) {
      bool all = true;
      for (const auto& [key, z] : cells) {
        bool hit = false;
        for (long long dj : {0LL, -1LL, 1LL}) {
          const auto digits = detail::steer_digits(sp.d, m, z.point().theta, c.theta, dj);
          if (!digits) break;
          std::size_t budget = 1u << 16;
          detail::fiber_search(sp, z, *digits, 0, c, eps, budget, [&](const FinePoint&) { return hit = true; });
          if (hit) break;
        }
        if (!hit) {
          all = false;
          break;
        }
      }
      if (all) found = m;
    }
    rep.per_center.push_back(found);
  }
  rep.tau = 0;
  for (int m : rep.per_center) rep.tau = (m < 0 || rep.tau < 0) ? -1 : std::max(rep.tau, m);
  return rep;
}

struct GlueSegment {
  TrackedPoint x;
  std::size_t n = 0;
};

enum class GlueStatus { success, budget_exhausted, verification_failed };

inline const char* to_string(GlueStatus s) {
  switch (s) {
    case GlueStatus::success: return "success";
    case GlueStatus::budget_exhausted: return "budget_exhausted";
    case GlueStatus::verification_failed: return "verification_failed";
  }
  return "?";
}

struct ShadowReport {
  bool ok = false;
  double max_deviation = 0.0;
  std::size_t first_bad_segment = 0;
};

// Forward replay of y: d(f^{k + offset_i} y, f^k x_i) < eps for 0 <= k < n_i,
// with gaps tau_i between consecutive segments.
inline ShadowReport verify_shadowing(const SystemParams& sp, const FinePoint& y, const std::vector<GlueSegment>& segs,
                                     const std::vector<int>& gaps, double eps) {
  ShadowReport rep;
  rep.ok = true;
  FinePoint z = y;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    TrackedPoint x = segs[i].x;
    for (std::size_t k = 0; k < segs[i].n; ++k) {
      const double dv = dist(z.point(), x.point());
      rep.max_deviation = std::max(rep.max_deviation, dv);
      if (!(dv < eps) && rep.ok) {
        rep.ok = false;
        rep.first_bad_segment = i;
      }
      fine_step(sp, z);
      step(sp, x);
    }
    if (i + 1 < segs.size()) {
      // the last shadowed step above already advanced once
      for (int k = 0; k < gaps[i]; ++k) fine_step(sp, z);
    }
  }
  return rep;
}

struct GlueResult {
  GlueStatus status = GlueStatus::budget_exhausted;
  FinePoint y;
  std::vector<int> gaps;
  std::size_t length = 0;
  ShadowReport shadow;
};

// Backward construction from the last segment: for each earlier segment find
// a depth-m preimage of the current start within eps of the segment's last
// point (gap m - 1), then pull back along the segment choosing the nearest
// preimage, keeping every point eps-close.
inline GlueResult glue(const SystemParams& sp, const std::vector<GlueSegment>& segs, double eps, int max_gap,
                       std::size_t beam = 64) {
  require(!segs.empty(), "glue: no segments");
  for (const auto& s : segs) require(s.n >= 1, "glue: empty segment");
  GlueResult res;
  FinePoint Z = fine(segs.back().x);
  res.gaps.assign(segs.size() - 1, 0);
  for (std::size_t i = segs.size() - 1; i-- > 0;) {
    const auto seg = make_segment(sp, segs[i].x, segs[i].n);
    const Point last = seg.points.back();
    bool done = false;
    for (int m = 1; m <= max_gap + 1 && !done; ++m) {
      std::vector<std::pair<double, FinePoint>> cands;
      for (long long dj : {0LL, -1LL, 1LL}) {
        const auto digits = detail::steer_digits(sp.d, m, Z.point().theta, last.theta, dj);
        if (!digits) break;
        std::size_t budget = 1u << 16;
        detail::fiber_search(sp, Z, *digits, 0, last, eps, budget,
                             [&](const FinePoint& u) {
                               cands.emplace_back(dist(u.point(), last), u);
                               return false;
                             });
      }
      std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (cands.size() > beam) cands.resize(beam);
      for (const auto& [dv, u] : cands) {
        FinePoint w = u;
        bool ok = true;
        for (std::size_t k = seg.size() - 1; k-- > 0 && ok;) {
          std::optional<FinePoint> best;
          double bd = kInf;
          for (int s : {1, -1}) {
            auto c = fine_pullback(sp, w, seg.digits[k], s);
            if (!c) continue;
            const double dc = dist(c->point(), seg.points[k]);
            if (dc < bd) {
              bd = dc;
              best = c;
            }
          }
          ok = best && bd < eps;
          if (ok) w = *best;
        }
        if (ok) {
          Z = w;
          res.gaps[i] = m - 1;
          done = true;
          break;
        }
      }
    }
    if (!done) {
      res.status = GlueStatus::budget_exhausted;
      return res;
    }
  }
  res.y = Z;
  res.length = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) res.length += segs[i].n + (i + 1 < segs.size() ? res.gaps[i] : 0);
  res.shadow = verify_shadowing(sp, res.y, segs, res.gaps, eps);
  res.status = res.shadow.ok ? GlueStatus::success : GlueStatus::verification_failed;
  return res;
}

}  // namespace viana
