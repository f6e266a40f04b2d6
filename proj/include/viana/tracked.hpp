#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "viana/map.hpp"
#include "viana/rng.hpp"

namespace viana {

// Base-d expansion theta = sum_i digit(i) d^{-(i+1)}.  Leading digits are
// explicit, the rest come from a counter-based hash, so the forward shift
// and the inverse branches act exactly on the coordinate.
class BaseCode {
 public:
  BaseCode() = default;
  BaseCode(int d, std::uint64_t tail_seed) : d_(d), tail_seed_(tail_seed) { init_window(); }

  static BaseCode from_theta(int d, double theta, std::uint64_t tail_seed) {
    BaseCode c(d, tail_seed);
    const int k = window_digits(d);
    std::vector<std::uint8_t> digits(k);
    long double x = wrap01(theta);
    for (int i = 0; i < k; ++i) {
      x *= d;
      auto dig = static_cast<int>(x);
      dig = std::min(std::max(dig, 0), d - 1);
      digits[i] = static_cast<std::uint8_t>(dig);
      x -= dig;
    }
    c.head_.assign(digits.rbegin(), digits.rend());
    c.init_window();
    return c;
  }

  int base() const { return d_; }

  int digit(std::size_t i) const {
    if (i < head_.size()) return head_[head_.size() - 1 - i];
    return static_cast<int>(hash_combine(tail_seed_, tail_offset_ + (i - head_.size())) % static_cast<std::uint64_t>(d_));
  }

  void shift() {
    const auto next = static_cast<std::uint64_t>(digit(static_cast<std::size_t>(k_)));
    window_ = (window_ % (dk_ / d_)) * d_ + next;
    if (!head_.empty()) {
      head_.pop_back();
    } else {
      ++tail_offset_;
    }
  }

  void prepend(int j) {
    window_ = static_cast<std::uint64_t>(j) * (dk_ / d_) + window_ / d_;
    head_.push_back(static_cast<std::uint8_t>(j));
  }

  double theta() const {
    return static_cast<double>(static_cast<long double>(window_) / static_cast<long double>(dk_));
  }

  // Largest K with d^K <= 2^63.
  static int window_digits(int d) {
    int k = 0;
    unsigned __int128 p = 1;
    while (p * d <= (static_cast<unsigned __int128>(1) << 63)) {
      p *= d;
      ++k;
    }
    return k;
  }

 private:
  void init_window() {
    k_ = window_digits(d_);
    dk_ = 1;
    for (int i = 0; i < k_; ++i) dk_ *= static_cast<std::uint64_t>(d_);
    window_ = 0;
    for (int i = 0; i < k_; ++i) window_ = window_ * d_ + static_cast<std::uint64_t>(digit(i));
  }

  int d_ = 16;
  int k_ = 0;
  std::uint64_t dk_ = 1;
  std::uint64_t window_ = 0;
  std::vector<std::uint8_t> head_;  // reversed: head_.back() is digit 0
  std::uint64_t tail_seed_ = 0;
  std::uint64_t tail_offset_ = 0;
};

// A point whose base coordinate is carried by its digit expansion in skew
// mode.  In perturbed mode the base is a plain double.
struct TrackedPoint {
  BaseCode code;
  double theta = 0.0;
  double t = 0.0;
  bool coded = false;

  Point point() const { return {theta, t}; }
};

inline std::uint64_t point_hash(const Point& p, std::uint64_t salt) {
  return hash_combine(hash_combine(std::bit_cast<std::uint64_t>(p.theta), std::bit_cast<std::uint64_t>(p.t)), salt);
}

inline TrackedPoint track(const SystemParams& sp, const Point& p, std::uint64_t salt = 0) {
  TrackedPoint x;
  x.t = p.t;
  if (sp.perturbed()) {
    x.theta = wrap01(p.theta);
    return x;
  }
  x.coded = true;
  x.code = BaseCode::from_theta(sp.d, p.theta, point_hash(p, hash_combine(sp.rng_seed, salt)));
  x.theta = x.code.theta();
  return x;
}

// Lebesgue-distributed point of S^1 x I.
inline TrackedPoint random_tracked(const SystemParams& sp, Rng& g) {
  TrackedPoint x;
  x.t = uniform(g, sp.trap_lo, sp.trap_hi);
  if (sp.perturbed()) {
    x.theta = uniform01(g);
    return x;
  }
  x.coded = true;
  x.code = BaseCode(sp.d, g());
  x.theta = x.code.theta();
  return x;
}

inline void step(const SystemParams& sp, TrackedPoint& x) {
  if (!x.coded) {
    const Point q = apply(sp, x.point());
    x.theta = q.theta;
    x.t = q.t;
    return;
  }
  x.t = sp.a0 - x.t * x.t + sp.alpha * std::sin(kTwoPi * x.theta);
  x.code.shift();
  x.theta = x.code.theta();
}

// Preimage of x on base branch j and fiber sign s.
inline std::optional<TrackedPoint> pullback(const SystemParams& sp, const TrackedPoint& x, int j, int s) {
  if (!x.coded) {
    auto y = preimage(sp, x.point(), j, s);
    if (!y) return std::nullopt;
    TrackedPoint r;
    r.theta = y->theta;
    r.t = y->t;
    return r;
  }
  TrackedPoint r = x;
  r.code.prepend(j);
  r.theta = r.code.theta();
  const double rad = sp.a0 + sp.alpha * std::sin(kTwoPi * r.theta) - x.t;
  if (rad < 0.0) return std::nullopt;
  r.t = s * std::sqrt(rad);
  return r;
}

// In-place variant of pullback; x is unchanged on failure.
inline bool pullback_inplace(const SystemParams& sp, TrackedPoint& x, int j, int s) {
  if (!x.coded) {
    auto y = preimage(sp, x.point(), j, s);
    if (!y) return false;
    x.theta = y->theta;
    x.t = y->t;
    return true;
  }
  const double th = (x.theta + j) / sp.d;
  if (sp.a0 + sp.alpha * std::sin(kTwoPi * th) - x.t < 0.0) return false;
  x.code.prepend(j);
  x.theta = x.code.theta();
  const double rad = sp.a0 + sp.alpha * std::sin(kTwoPi * x.theta) - x.t;
  x.t = s * std::sqrt(std::max(rad, 0.0));
  return true;
}

// Preimage of x following the branch of the reference point `ref` (which maps near x).
inline std::optional<TrackedPoint> pullback_like(const SystemParams& sp, const TrackedPoint& x, const Point& ref,
                                                 int ref_digit) {
  const int s = ref.t >= 0.0 ? 1 : -1;
  if (x.coded) return pullback(sp, x, ref_digit, s);
  const Point fr = apply(sp, ref);
  const auto dx = jacobian(sp, ref).solve({circle_diff(x.theta, fr.theta), x.t - fr.t});
  if (!dx) return std::nullopt;
  auto y = detail::newton_preimage(sp, x.point(), {ref.theta + dx->x, ref.t + dx->y});
  if (!y) return std::nullopt;
  TrackedPoint r;
  r.theta = y->theta;
  r.t = y->t;
  return r;
}

// Base digit of the branch containing p (skew: leading digit; perturbed: nearest integer of d*theta).
inline int branch_digit(const SystemParams& sp, const TrackedPoint& p) {
  if (p.coded) return p.code.digit(0);
  return static_cast<int>(std::floor(p.theta * sp.d)) % sp.d;
}

}  // namespace viana
