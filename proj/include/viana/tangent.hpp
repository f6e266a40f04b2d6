#pragma once

#include <cmath>
#include <vector>

#include "viana/map.hpp"
#include "viana/parallel.hpp"
#include "viana/stats.hpp"
#include "viana/tracked.hpp"

namespace viana {

struct CenterDirection {
  Vec2 dir{0.0, 1.0};
  double residual = 0.0;  // angle change between depth m/2 and m
  bool ok = true;
};

namespace detail {

// Backward inverse-cocycle iteration along pts[0..m]: returns the direction at pts[0].
inline std::optional<Vec2> pull_center(const SystemParams& sp, const std::vector<Point>& pts, std::size_t m) {
  Vec2 w = normalized({1.0, 1.0});
  for (std::size_t j = m; j-- > 0;) {
    const auto v = jacobian(sp, pts[j]).solve(w);
    if (!v) return std::nullopt;
    w = normalized(*v);
  }
  return w;
}

}  // namespace detail

// Center direction E^c(x).  Skew mode gives the vertical exactly unless
// force_iteration is set; otherwise a depth-m inverse-cocycle iteration.
inline CenterDirection center_direction(const SystemParams& sp, const TrackedPoint& x, int m = 40,
                                        bool force_iteration = false) {
  CenterDirection out;
  if (!sp.perturbed() && !force_iteration) return out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    TrackedPoint y = x;
    if (attempt == 1) y.t += 1e-12;
    std::vector<Point> pts;
    pts.reserve(m + 1);
    for (int i = 0; i <= m; ++i) {
      pts.push_back(y.point());
      step(sp, y);
    }
    const auto full = detail::pull_center(sp, pts, static_cast<std::size_t>(m));
    const auto half = detail::pull_center(sp, pts, static_cast<std::size_t>(m / 2));
    if (full && half) {
      out.dir = *full;
      out.residual = line_angle(*full, *half);
      out.ok = true;
      return out;
    }
  }
  out.ok = false;
  return out;
}

struct UnstableDirection {
  Vec2 dir{1.0, 0.0};
  double branch_spread = 0.0;  // angle between two independent backward branches
  bool ok = true;
};

namespace detail {

inline std::optional<Vec2> push_unstable(const SystemParams& sp, const TrackedPoint& x, int m, int digit, int sign) {
  std::vector<Point> chain;
  TrackedPoint y = x;
  for (int i = 0; i < m; ++i) {
    auto p = pullback(sp, y, digit, sign);
    if (!p || !in_interval(sp, p->t)) p = pullback(sp, y, digit, -sign);
    if (!p) return std::nullopt;
    y = *p;
    chain.push_back(y.point());
  }
  Vec2 w{1.0, 0.0};
  for (std::size_t i = chain.size(); i-- > 0;) w = normalized(jacobian(sp, chain[i]) * w);
  return w;
}

}  // namespace detail

// Unstable direction E^u(x): push (1, 0) forward from a depth-m preimage.
inline UnstableDirection unstable_direction(const SystemParams& sp, const TrackedPoint& x, int m = 30) {
  UnstableDirection out;
  const auto a = detail::push_unstable(sp, x, m, 0, 1);
  const auto b = detail::push_unstable(sp, x, m, sp.d / 2, -1);
  if (!a || !b) {
    out.ok = false;
    return out;
  }
  out.dir = *a;
  out.branch_spread = line_angle(*a, *b);
  return out;
}

// psi^c(x) = log |Df(x)|_{E^c(x)}|; -inf on the critical set.
inline double psi_c(const SystemParams& sp, const TrackedPoint& x, int m = 40) {
  if (!sp.perturbed()) return x.t == 0.0 ? -kInf : std::log(2.0 * std::abs(x.t));
  const auto ec = center_direction(sp, x, m);
  if (!ec.ok) return -kInf;
  const double n = norm(jacobian(sp, x.point()) * ec.dir);
  return n > 0.0 ? std::log(n) : -kInf;
}

// Forward orbit with derivative data.
struct OrbitSegment {
  std::vector<Point> points;     // x_0 .. x_{n-1}
  std::vector<int> digits;       // base branch of x_k
  std::vector<double> psi;       // psi^c(x_k)
  std::vector<double> inv_norm;  // |Df(x_k)^{-1}|
  std::vector<Jacobian> jac;     // filled when frames are requested
  std::vector<Vec2> e_c, e_u;    // idem
  TrackedPoint start;
  TrackedPoint end;  // x_n
  std::size_t size() const { return points.size(); }
};

// Builds x_0 .. x_{n-1}.  Perturbed mode uses `lookahead` extra steps for E^c.
inline OrbitSegment make_segment(const SystemParams& sp, const TrackedPoint& x0, std::size_t n,
                                 bool with_frames = false, int lookahead = 40) {
  OrbitSegment s;
  s.start = x0;
  s.points.reserve(n);
  s.digits.reserve(n);
  s.psi.reserve(n);
  s.inv_norm.reserve(n);
  TrackedPoint x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    s.points.push_back(x.point());
    s.digits.push_back(branch_digit(sp, x));
    step(sp, x);
  }
  s.end = x;
  std::vector<Vec2> ec(n, Vec2{0.0, 1.0});
  if (sp.perturbed()) {
    std::vector<Point> tail;
    TrackedPoint y = x;
    for (int i = 0; i < lookahead; ++i) {
      tail.push_back(y.point());
      step(sp, y);
    }
    Vec2 w = normalized({1.0, 1.0});
    for (std::size_t j = tail.size(); j-- > 0;) {
      const auto v = jacobian(sp, tail[j]).solve(w);
      if (v) w = normalized(*v);
    }
    for (std::size_t k = n; k-- > 0;) {
      const auto v = jacobian(sp, s.points[k]).solve(w);
      if (v) w = normalized(*v);
      ec[k] = w;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Jacobian J = jacobian(sp, s.points[k]);
    s.inv_norm.push_back(J.inv_norm());
    if (!sp.perturbed()) {
      s.psi.push_back(s.points[k].t == 0.0 ? -kInf : std::log(2.0 * std::abs(s.points[k].t)));
    } else {
      const double nv = norm(J * ec[k]);
      s.psi.push_back(nv > 0.0 ? std::log(nv) : -kInf);
    }
  }
  if (with_frames) {
    s.jac.reserve(n);
    for (const auto& p : s.points) s.jac.push_back(jacobian(sp, p));
    s.e_c = ec;
    s.e_u.reserve(n);
    Vec2 w = unstable_direction(sp, x0).dir;
    for (std::size_t k = 0; k < n; ++k) {
      s.e_u.push_back(w);
      w = normalized(s.jac[k] * w);
    }
  }
  return s;
}

// Sample from the SRB proxy: Lebesgue start, then a burn-in.
inline TrackedPoint srb_sample(const SystemParams& sp, Rng& g, int burn_in = 1000) {
  TrackedPoint x = random_tracked(sp, g);
  for (int i = 0; i < burn_in; ++i) step(sp, x);
  return x;
}

struct LyapunovEstimate {
  double value = kNaN;
  double error_bar = kNaN;
  double half_drift = kNaN;
  double batch_stderr = kNaN;
  std::size_t skipped = 0;  // critical-set hits
};

inline LyapunovEstimate to_estimate(const MeanWithError& m, std::size_t skipped) {
  return {m.value, m.error_bar, m.half_drift, m.batch_stderr, skipped};
}

inline LyapunovEstimate lyapunov_u(const SystemParams& sp, const TrackedPoint& x0, std::size_t N) {
  TrackedPoint x = x0;
  Vec2 w = unstable_direction(sp, x).dir;
  std::vector<double> terms;
  terms.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Vec2 v = jacobian(sp, x.point()) * w;
    const double nv = norm(v);
    terms.push_back(std::log(nv));
    w = {v.x / nv, v.y / nv};
    step(sp, x);
  }
  return to_estimate(mean_with_error(terms), 0);
}

inline LyapunovEstimate lyapunov_c(const SystemParams& sp, const TrackedPoint& x0, std::size_t N) {
  std::vector<double> terms;
  terms.reserve(N);
  std::size_t skipped = 0;
  if (!sp.perturbed()) {
    TrackedPoint x = x0;
    for (std::size_t k = 0; k < N; ++k) {
      if (x.t == 0.0) {
        ++skipped;
      } else {
        terms.push_back(std::log(2.0 * std::abs(x.t)));
      }
      step(sp, x);
    }
  } else {
    const auto seg = make_segment(sp, x0, N);
    for (double v : seg.psi) {
      if (std::isfinite(v)) {
        terms.push_back(v);
      } else {
        ++skipped;
      }
    }
  }
  return to_estimate(mean_with_error(terms), skipped);
}

enum class Exponent { unstable, center };

// Exponents for `seeds` SRB-proxy starts; seed i uses stream (master, tag, i).
inline std::vector<LyapunovEstimate> lyapunov_batch(const SystemParams& sp, Exponent which, std::size_t seeds,
                                                    std::size_t N, std::uint64_t master, std::size_t threads = 0) {
  std::vector<LyapunovEstimate> out(seeds);
  parallel_for(
      seeds,
      [&](std::size_t i) {
        Rng g = make_rng(master, "lyapunov", i);
        const TrackedPoint x = srb_sample(sp, g);
        out[i] = which == Exponent::unstable ? lyapunov_u(sp, x, N) : lyapunov_c(sp, x, N);
      },
      threads);
  return out;
}

// Pairwise agreement within k combined error bars.
inline bool pairwise_agree(const std::vector<LyapunovEstimate>& v, double k = 3.0) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const double comb = std::hypot(v[i].error_bar, v[j].error_bar);
      if (std::abs(v[i].value - v[j].value) > k * comb) return false;
    }
  }
  return true;
}

struct C0Calibration {
  double c0 = kNaN;
  double positive_fraction = 0.0;
  std::vector<double> lambda_c;
};

// c0 = 0.9 x the 1st percentile of the positive center exponents.
inline C0Calibration calibrate_c0(const SystemParams& sp, std::size_t seeds, std::size_t N, std::uint64_t master,
                                  std::size_t threads = 0) {
  C0Calibration c;
  const auto est = lyapunov_batch(sp, Exponent::center, seeds, N, derive_seed(master, "c0"), threads);
  std::vector<double> pos;
  for (const auto& e : est) {
    c.lambda_c.push_back(e.value);
    if (e.value > 0.0) pos.push_back(e.value);
  }
  c.positive_fraction = seeds ? static_cast<double>(pos.size()) / static_cast<double>(seeds) : 0.0;
  if (pos.empty()) throw NumericError("no positive center exponent: c0 cannot be estimated");
  c.c0 = 0.9 * percentile(pos, 1.0);
  return c;
}

// Slack eps_hat with every unstable exponent inside [log(d - eps), log(d + eps)].
inline double eps_hat_from(const SystemParams& sp, const std::vector<LyapunovEstimate>& lu) {
  double e = 0.0;
  for (const auto& v : lu) {
    for (double s : {-1.0, 1.0}) e = std::max(e, std::abs(std::exp(v.value + s * v.error_bar) - sp.d));
  }
  return e;
}

// (1/N) sum -log dist_delta(f^j x, C).
inline double slow_recurrence_stat(const SystemParams& sp, const TrackedPoint& x0, std::size_t N, double delta) {
  TrackedPoint x = x0;
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    s -= std::log(trunc_dist(sp, x.point(), delta));
    step(sp, x);
  }
  return s / static_cast<double>(N);
}

inline double slow_recurrence_stat(std::span<const double> crit_dists, double delta) {
  double s = 0.0;
  for (double c : crit_dists) s -= std::log(c >= delta ? 1.0 : c);
  return crit_dists.empty() ? 0.0 : s / static_cast<double>(crit_dists.size());
}

struct IntegralEstimate {
  double value = kNaN;
  double half_value = kNaN;
  bool stable = false;
};

// Birkhoff average of |log dist(x, C)|, stable when the N/2 and N values agree within 5%.
inline IntegralEstimate log_crit_dist_integral_estimate(const SystemParams& sp, const TrackedPoint& x0,
                                                        std::size_t N) {
  TrackedPoint x = x0;
  double s = 0.0, half = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double c = crit_distance(sp, x.point());
    s += c > 0.0 ? std::abs(std::log(c)) : kInf;
    if (k + 1 == N / 2) half = s / static_cast<double>(N / 2);
    step(sp, x);
  }
  IntegralEstimate e;
  e.value = s / static_cast<double>(N);
  e.half_value = half;
  e.stable = std::isfinite(e.value) && std::abs(e.value - half) <= 0.05 * std::abs(e.value);
  return e;
}

}  // namespace viana
