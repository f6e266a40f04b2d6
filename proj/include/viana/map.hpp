#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "viana/errors.hpp"
#include "viana/stats.hpp"

namespace viana {

enum class Mode { skew, perturbed };

// amp * sin(2 pi k_theta theta + k_t t + phase)
struct FourierTerm {
  double amp = 1.0;
  int k_theta = 1;
  int k_t = 1;
  double phase = 0.0;
};

// Truncated Fourier field on S^1 x R, normalised to unit C^3 bound.
class FourierField {
 public:
  FourierField() = default;
  explicit FourierField(std::vector<FourierTerm> terms) : terms_(std::move(terms)) {
    double c3 = 0.0;
    for (const auto& f : terms_) {
      const double w = kTwoPi * std::abs(f.k_theta) + std::abs(f.k_t);
      c3 += std::abs(f.amp) * std::max(1.0, w * w * w);
    }
    scale_ = c3 > 0.0 ? 1.0 / c3 : 0.0;
  }
  struct Eval {
    double value = 0.0, d_theta = 0.0, d_t = 0.0;
  };
  Eval eval(double theta, double t) const {
    Eval e;
    for (const auto& f : terms_) {
      const double arg = kTwoPi * f.k_theta * theta + f.k_t * t + f.phase;
      const double s = std::sin(arg), c = std::cos(arg);
      e.value += f.amp * s;
      e.d_theta += f.amp * kTwoPi * f.k_theta * c;
      e.d_t += f.amp * f.k_t * c;
    }
    e.value *= scale_;
    e.d_theta *= scale_;
    e.d_t *= scale_;
    return e;
  }
  bool empty() const { return terms_.empty(); }
  const std::vector<FourierTerm>& terms() const { return terms_; }

 private:
  std::vector<FourierTerm> terms_;
  double scale_ = 0.0;
};

struct Perturbation {
  double size = 0.0;  // C^3 size knob
  FourierField base{{{1.0, 1, 1, 0.0}}};
  FourierField fiber{{{1.0, 1, 1, 0.3}, {0.5, 2, 3, 1.1}}};
};

// Derived constants; NaN until calibrated.
struct ThermoConstants {
  double c0_estimate = kNaN;
  double eps_hat = kNaN;
  double sigma = kNaN;
  double delta = kNaN;
  double b = 0.25;
  double r = kNaN;
  double delta1 = kNaN;
  double nu_hat = kNaN;
  bool resolved() const { return std::isfinite(c0_estimate) && std::isfinite(sigma) && std::isfinite(delta); }
};

struct SystemParams {
  int d = 16;
  double a0 = kNaN;
  double alpha = 1e-3;
  Mode mode = Mode::skew;
  Perturbation perturbation;
  double trap_lo = kNaN;
  double trap_hi = kNaN;
  std::uint64_t rng_seed = 1;
  ThermoConstants constants;

  bool perturbed() const { return mode == Mode::perturbed && perturbation.size != 0.0; }
};

struct Point {
  double theta = 0.0;
  double t = 0.0;
};

struct Vec2 {
  double x = 0.0;  // theta component
  double y = 0.0;  // t component
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return {v.x / n, v.y / n};
}
// Angle between lines spanned by u and v, in [0, pi/2].
inline double line_angle(Vec2 u, Vec2 v) {
  const double c = std::abs(u.x * v.x + u.y * v.y) / (norm(u) * norm(v));
  return std::acos(std::min(1.0, c));
}

struct Jacobian {
  double m00 = 0.0, m01 = 0.0;  // d theta' / d(theta, t)
  double m10 = 0.0, m11 = 0.0;  // d t' / d(theta, t)

  Vec2 operator*(Vec2 v) const { return {m00 * v.x + m01 * v.y, m10 * v.x + m11 * v.y}; }
  double det() const { return m00 * m11 - m01 * m10; }
  // Solves J w = v; returns nullopt when singular.
  std::optional<Vec2> solve(Vec2 v) const {
    const double dt = det();
    if (dt == 0.0 || !std::isfinite(dt)) return std::nullopt;
    return Vec2{(m11 * v.x - m01 * v.y) / dt, (-m10 * v.x + m00 * v.y) / dt};
  }
  // Largest singular value.
  double sigma_max() const {
    const double fro = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11;
    const double dt = det();
    const double disc = std::sqrt(std::max(0.0, fro * fro - 4.0 * dt * dt));
    return std::sqrt(0.5 * (fro + disc));
  }
  double sigma_min() const {
    const double smax = sigma_max();
    return smax > 0.0 ? std::abs(det()) / smax : 0.0;
  }
  // ||Df^{-1}||; +inf when singular.
  double inv_norm() const {
    const double smin = sigma_min();
    return smin > 0.0 ? 1.0 / smin : kInf;
  }
};

inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

// Signed representative of a - b on the circle, in [-1/2, 1/2).
inline double circle_diff(double a, double b) {
  double r = a - b;
  r -= std::floor(r + 0.5);
  return r;
}

inline double circle_dist(double a, double b) { return std::abs(circle_diff(a, b)); }

inline double dist(const Point& p, const Point& q) {
  return std::max(circle_dist(p.theta, q.theta), std::abs(p.t - q.t));
}

inline bool in_interval(const SystemParams& sp, double t) { return t >= sp.trap_lo && t <= sp.trap_hi; }

inline Point apply(const SystemParams& sp, const Point& p) {
  const double s = std::sin(kTwoPi * p.theta);
  if (!sp.perturbed()) {
    return {wrap01(sp.d * p.theta), sp.a0 - p.t * p.t + sp.alpha * s};
  }
  const double e = sp.perturbation.size;
  const auto u = sp.perturbation.base.eval(p.theta, p.t);
  const auto v = sp.perturbation.fiber.eval(p.theta, p.t);
  return {wrap01(sp.d * p.theta + e * u.value), sp.a0 - p.t * p.t + sp.alpha * s + e * v.value};
}

inline Jacobian jacobian(const SystemParams& sp, const Point& p) {
  Jacobian j;
  j.m00 = sp.d;
  j.m01 = 0.0;
  j.m10 = kTwoPi * sp.alpha * std::cos(kTwoPi * p.theta);
  j.m11 = -2.0 * p.t;
  if (sp.perturbed()) {
    const double e = sp.perturbation.size;
    const auto u = sp.perturbation.base.eval(p.theta, p.t);
    const auto v = sp.perturbation.fiber.eval(p.theta, p.t);
    j.m00 += e * u.d_theta;
    j.m01 += e * u.d_t;
    j.m10 += e * v.d_theta;
    j.m11 += e * v.d_t;
  }
  return j;
}

// Height of the critical curve {det Df = 0} over theta.
inline double critical_height(const SystemParams& sp, double theta) {
  if (!sp.perturbed()) return 0.0;
  const double e = sp.perturbation.size;
  double t = 0.0;
  for (int it = 0; it < 60; ++it) {
    const auto u = sp.perturbation.base.eval(theta, t);
    const auto v = sp.perturbation.fiber.eval(theta, t);
    const double a = sp.d + e * u.d_theta;
    const double next =
        (a * e * v.d_t - e * u.d_t * (kTwoPi * sp.alpha * std::cos(kTwoPi * theta) + e * v.d_theta)) / (2.0 * a);
    if (std::abs(next - t) < 1e-17) return next;
    t = next;
  }
  return t;
}

inline double crit_distance(const SystemParams& sp, const Point& p) {
  if (!sp.perturbed()) return std::abs(p.t);
  const double h = 1e-6;
  const double tc = critical_height(sp, p.theta);
  const double slope = (critical_height(sp, p.theta + h) - critical_height(sp, p.theta - h)) / (2.0 * h);
  return std::abs(p.t - tc) / (1.0 + std::abs(slope));
}

inline double trunc_dist(const SystemParams& sp, const Point& p, double delta) {
  const double c = crit_distance(sp, p);
  return c >= delta ? 1.0 : c;
}

namespace detail {

// Newton solve of apply(y) = target from guess; nullopt if it does not converge.
inline std::optional<Point> newton_preimage(const SystemParams& sp, const Point& target, Point y) {
  for (int it = 0; it < 60; ++it) {
    const Point fy = apply(sp, y);
    const Vec2 r{circle_diff(fy.theta, target.theta), fy.t - target.t};
    if (std::max(std::abs(r.x), std::abs(r.y)) < 1e-15) return Point{wrap01(y.theta), y.t};
    const auto step = jacobian(sp, y).solve(r);
    if (!step) return std::nullopt;
    y.theta -= step->x;
    y.t -= step->y;
    if (!std::isfinite(y.t)) return std::nullopt;
  }
  const Point fy = apply(sp, y);
  if (std::max(circle_dist(fy.theta, target.theta), std::abs(fy.t - target.t)) < 1e-13) {
    return Point{wrap01(y.theta), y.t};
  }
  return std::nullopt;
}

}  // namespace detail

// Skew-product preimage on base branch j with fiber sign s (+1/-1); nullopt if the radicand is negative.
inline std::optional<Point> skew_preimage(const SystemParams& sp, const Point& target, int j, int s) {
  const double theta = (target.theta + j) / sp.d;
  const double rad = sp.a0 + sp.alpha * std::sin(kTwoPi * theta) - target.t;
  if (rad < 0.0) return std::nullopt;
  return Point{theta, s * std::sqrt(rad)};
}

// Preimage on branch (j, s); perturbed mode refines the skew guess by Newton.
inline std::optional<Point> preimage(const SystemParams& sp, const Point& target, int j, int s) {
  if (!sp.perturbed()) return skew_preimage(sp, target, j, s);
  const double theta = (target.theta + j) / sp.d;
  const double rad = sp.a0 + sp.alpha * std::sin(kTwoPi * theta) - target.t;
  if (rad < 0.0) return std::nullopt;
  auto y = detail::newton_preimage(sp, target, {theta, s * std::sqrt(rad)});
  if (!y || (y->t == 0.0 ? false : (y->t > 0) != (s > 0))) return std::nullopt;
  return y;
}

// All preimages of target: up to 2d, or d when target lies on the critical-value set.
inline std::vector<Point> inverse_branches(const SystemParams& sp, const Point& target) {
  std::vector<Point> out;
  for (int j = 0; j < sp.d; ++j) {
    for (int s : {1, -1}) {
      auto y = preimage(sp, target, j, s);
      if (!y) continue;
      bool dup = false;
      for (const auto& q : out) dup = dup || dist(q, *y) == 0.0;
      if (!dup) out.push_back(*y);
    }
  }
  return out;
}

}  // namespace viana
