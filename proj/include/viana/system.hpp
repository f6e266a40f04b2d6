#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "viana/errors.hpp"
#include "viana/map.hpp"
#include "viana/rng.hpp"

namespace viana {

namespace detail {

inline double quad_iter(double a, int n) {
  double t = 0.0;
  for (int i = 0; i < n; ++i) t = a - t * t;
  return t;
}

inline double kneading_gap(double a, int k, int p) { return quad_iter(a, k + p) - quad_iter(a, k); }

}  // namespace detail

struct MisiurewiczRoot {
  double a = kNaN;
  double residual = kNaN;
  double cycle_multiplier = kNaN;
};

// Admissible parameters a in (1, 2) with h_a^{k+p}(0) = h_a^k(0), h_a(t) = a - t^2,
// where 0 is not periodic and the landing cycle is repelling.
inline std::vector<MisiurewiczRoot> misiurewicz_roots(int k, int p, double tol = 1e-10, double scan_step = 1e-4) {
  require(k >= 1 && p >= 1, "misiurewicz_roots: k, p must be positive");
  std::vector<MisiurewiczRoot> out;
  const auto steps = static_cast<int>(std::ceil(1.0 / scan_step));
  double a_prev = 1.0 + 1e-9;
  double g_prev = detail::kneading_gap(a_prev, k, p);
  for (int i = 1; i <= steps; ++i) {
    const double a_cur = std::min(2.0 - 1e-9, 1.0 + i * scan_step);
    const double g_cur = detail::kneading_gap(a_cur, k, p);
    if ((g_prev < 0.0) != (g_cur < 0.0) || g_cur == 0.0) {
      double lo = a_prev, hi = a_cur, glo = g_prev;
      double mid = 0.5 * (lo + hi);
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double gm = detail::kneading_gap(mid, k, p);
        if (gm == 0.0) break;
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      const double res = std::abs(detail::kneading_gap(mid, k, p));
      double min_orbit = kInf;
      for (int j = 1; j <= k + p; ++j) min_orbit = std::min(min_orbit, std::abs(detail::quad_iter(mid, j)));
      double mult = 1.0;
      double t = detail::quad_iter(mid, k);
      for (int j = 0; j < p; ++j) {
        mult *= 2.0 * std::abs(t);
        t = mid - t * t;
      }
      if (res < tol && min_orbit > 1e-4 && mult > 1.0 + 1e-9) out.push_back({mid, res, mult});
    }
    a_prev = a_cur;
    g_prev = g_cur;
    if (a_cur >= 2.0 - 1e-9) break;
  }
  return out;
}

// Largest admissible Misiurewicz parameter for (k, p).
inline double find_misiurewicz_a0(int k = 4, int p = 1, double tol = 1e-10) {
  const auto roots = misiurewicz_roots(k, p, tol);
  if (roots.empty()) {
    throw NumericError("no such kneading parameter for (k, p) = (" + std::to_string(k) + ", " + std::to_string(p) +
                       ")");
  }
  return roots.back().a;
}

struct TrappingInterval {
  double lo = kNaN;
  double hi = kNaN;
};

// Fiber interval I with f(S^1 x I) inside int(S^1 x I): the hull of the
// critical orbit padded by margins; validated analytically.
inline TrappingInterval trapping_interval(double a0, double alpha, double perturbation_size = 0.0,
                                          double margin_hi = 0.005, double margin_lo = 0.02) {
  const double amp = alpha + std::abs(perturbation_size);
  const double hi = a0 + amp + margin_hi;
  double lo = -hi;
  for (int it = 0; it < 200; ++it) {
    const double next = a0 - std::max(hi * hi, lo * lo) - amp - margin_lo;
    if (!(next > -2.0)) throw NumericError("no trapping interval: lower end leaves (-2, 2)");
    if (std::abs(next - lo) < 1e-15) {
      lo = next;
      break;
    }
    lo = next;
  }
  if (!(hi < 2.0)) throw NumericError("no trapping interval: upper end leaves (-2, 2)");
  const double img_hi = a0 + amp;
  const double img_lo = a0 - std::max(hi * hi, lo * lo) - amp;
  if (!(img_hi < hi && img_lo > lo)) throw NumericError("trapping interval failed validation");
  return {lo, hi};
}

inline SystemParams make_params(int d, double a0, double alpha, Mode mode = Mode::skew,
                                double perturbation_size = 0.0, std::uint64_t seed = 1) {
  if (d < 2) throw ConfigError("d must be an integer >= 2");
  if (!(a0 > 1.0 && a0 < 2.0)) throw ConfigError("a0 must lie in (1, 2): the fiber map t -> a0 - t^2 needs a Misiurewicz parameter in (1, 2)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  SystemParams sp;
  sp.d = d;
  sp.a0 = a0;
  sp.alpha = alpha;
  sp.mode = mode;
  sp.perturbation.size = mode == Mode::perturbed ? perturbation_size : 0.0;
  sp.rng_seed = seed;
  const auto I = trapping_interval(a0, alpha, sp.perturbation.size);
  sp.trap_lo = I.lo;
  sp.trap_hi = I.hi;
  return sp;
}

// Default system: d = 16, alpha = 1e-3, a0 the (4, 1) Misiurewicz parameter.
inline SystemParams default_params(std::uint64_t seed = 1) {
  return make_params(16, find_misiurewicz_a0(4, 1), 1e-3, Mode::skew, 0.0, seed);
}

struct PeriodicPoints {
  std::vector<Point> points;
  bool complete = true;
};

// Periodic points of period dividing p, by fixed points of inverse-branch
// compositions polished by Newton on f^p(x) - x.
inline PeriodicPoints find_periodic_points(const SystemParams& sp, int p, double tol = 1e-9,
                                           std::size_t budget = 1u << 20) {
  require(p >= 1 && p <= 12, "find_periodic_points: period out of range");
  PeriodicPoints out;
  double dp = 1.0;
  for (int i = 0; i < p; ++i) dp *= sp.d;
  const double candidates = (dp - 1.0) * std::ldexp(1.0, p);
  auto base_count = static_cast<std::uint64_t>(dp - 1.0);
  if (candidates > static_cast<double>(budget)) {
    out.complete = false;
    base_count = static_cast<std::uint64_t>(static_cast<double>(budget) / std::ldexp(1.0, p));
  }
  auto fp = [&](Point x) {
    for (int i = 0; i < p; ++i) x = apply(sp, x);
    return x;
  };
  std::size_t first_of_orbit = 0;  // distinct base points are far apart; dedupe per base point
  auto add = [&](const Point& x) {
    for (std::size_t i = first_of_orbit; i < out.points.size(); ++i) {
      if (dist(out.points[i], x) < 1e3 * tol) return;
    }
    out.points.push_back(x);
  };
  std::vector<double> thetas(p);
  for (std::uint64_t J = 0; J < base_count; ++J) {
    first_of_orbit = out.points.size();
    thetas[0] = static_cast<double>(J) / (dp - 1.0);
    for (int i = 1; i < p; ++i) thetas[i] = wrap01(sp.d * thetas[i - 1]);
    for (std::uint32_t signs = 0; signs < (1u << p); ++signs) {
      // Fixed point of the fiber composition along the base orbit.
      double t = 0.0;
      bool ok = true;
      for (int sweep = 0; sweep < 200 && ok; ++sweep) {
        double tk = t;
        for (int i = p - 1; i >= 0; --i) {
          const double rad = sp.a0 + sp.alpha * std::sin(kTwoPi * thetas[i]) - tk;
          if (rad < 0.0) {
            ok = false;
            break;
          }
          tk = ((signs >> i) & 1u ? -1.0 : 1.0) * std::sqrt(rad);
        }
        if (!ok) break;
        const bool done = std::abs(tk - t) < 1e-15;
        t = tk;
        if (done) break;
      }
      if (!ok) continue;
      Point x{thetas[0], t};
      // Newton on F(x) = f^p(x) - x.
      for (int it = 0; it < 30; ++it) {
        Point y = x;
        Jacobian J2{1, 0, 0, 1};
        for (int i = 0; i < p; ++i) {
          const Jacobian Ji = jacobian(sp, y);
          J2 = {Ji.m00 * J2.m00 + Ji.m01 * J2.m10, Ji.m00 * J2.m01 + Ji.m01 * J2.m11,
                Ji.m10 * J2.m00 + Ji.m11 * J2.m10, Ji.m10 * J2.m01 + Ji.m11 * J2.m11};
          y = apply(sp, y);
        }
        const Vec2 r{circle_diff(y.theta, x.theta), y.t - x.t};
        if (std::max(std::abs(r.x), std::abs(r.y)) < 1e-15) break;
        const Jacobian A{J2.m00 - 1.0, J2.m01, J2.m10, J2.m11 - 1.0};
        const auto s = A.solve(r);
        if (!s) break;
        x.theta = wrap01(x.theta - s->x);
        x.t -= s->y;
      }
      if (!in_interval(sp, x.t) || dist(fp(x), x) >= tol) continue;
      add(x);
    }
  }
  return out;
}

struct CriticalBehaviorReport {
  std::size_t pairs = 0;
  std::size_t violations_norm = 0;
  std::size_t violations_inv_norm = 0;
  std::size_t violations_det = 0;
  double worst_ratio_inv_norm = 0.0;
  double worst_ratio_det = 0.0;
  bool ok() const { return violations_norm + violations_inv_norm + violations_det == 0; }
};

// Non-degenerate critical behaviour: for x off C and 2 dist(x, y) < dist(x, C),
//   B^{-1} dist(x,C)^l <= |Df(x) v| / |v| <= B dist(x,C)^{-l},
//   |log|Df(x)^{-1}| - log|Df(y)^{-1}|| <= B dist(x,y) / dist(x,C)^l,
//   |log|det Df(x)| - log|det Df(y)|| <= B dist(x,y) / dist(x,C)^l.
inline CriticalBehaviorReport critical_behavior_check(const SystemParams& sp, double B, double l,
                                                      std::size_t samples, std::uint64_t seed) {
  CriticalBehaviorReport rep;
  Rng g = make_rng(seed, "critical_behavior");
  while (rep.pairs < samples) {
    const Point x{uniform01(g), uniform(g, sp.trap_lo, sp.trap_hi)};
    const double dc = crit_distance(sp, x);
    if (!(dc > 0.0)) continue;
    const double r = 0.5 * dc * uniform01(g) * 0.999;
    const double ang = uniform(g, 0.0, kTwoPi);
    Point y{wrap01(x.theta + r * std::cos(ang)), x.t + r * std::sin(ang)};
    const double dxy = dist(x, y);
    if (!(2.0 * dxy < dc)) continue;
    ++rep.pairs;
    const Jacobian Jx = jacobian(sp, x), Jy = jacobian(sp, y);
    const double dl = std::pow(dc, l);
    if (Jx.sigma_min() < dl / B || Jx.sigma_max() > B / dl) ++rep.violations_norm;
    const double bound = B * dxy / dl;
    if (dxy > 0.0) {
      const double e1 = std::abs(std::log(Jx.inv_norm()) - std::log(Jy.inv_norm()));
      const double e2 = std::abs(std::log(std::abs(Jx.det())) - std::log(std::abs(Jy.det())));
      rep.worst_ratio_inv_norm = std::max(rep.worst_ratio_inv_norm, e1 / bound);
      rep.worst_ratio_det = std::max(rep.worst_ratio_det, e2 / bound);
      if (e1 > bound) ++rep.violations_inv_norm;
      if (e2 > bound) ++rep.violations_det;
    }
  }
  return rep;
}

}  // namespace viana
