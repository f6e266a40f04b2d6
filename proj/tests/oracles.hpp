#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary.  Deliberately direct: no shared code with the library
// beyond the map itself.

#include <cmath>
#include <cstdint>
#include <vector>

#include "viana/decomposition.hpp"
#include "viana/map.hpp"
#include "viana/pressure.hpp"

namespace oracle {

using viana::Jacobian;
using viana::Point;
using viana::SystemParams;

// Central differences of the lifted map (theta not wrapped).
inline Jacobian finite_difference(const SystemParams& sp, const Point& p, double h = 1e-6) {
  const Point r0 = viana::apply(sp, p);
  auto lift = [&](Point q) {
    const Point r = viana::apply(sp, q);
    return viana::Vec2{r0.theta + viana::circle_diff(r.theta, r0.theta), r.t};
  };
  const auto a = lift({p.theta + h, p.t}), b = lift({p.theta - h, p.t});
  const auto c = lift({p.theta, p.t + h}), e = lift({p.theta, p.t - h});
  return {(a.x - b.x) / (2 * h), (c.x - e.x) / (2 * h), (a.y - b.y) / (2 * h), (c.y - e.y) / (2 * h)};
}

inline double max_entry_gap(const Jacobian& a, const Jacobian& b) {
  return std::max({std::abs(a.m00 - b.m00), std::abs(a.m01 - b.m01), std::abs(a.m10 - b.m10), std::abs(a.m11 - b.m11)});
}

// Every n and every k checked directly: O(N^2).
inline std::vector<std::size_t> hyperbolic_times(const std::vector<double>& inv, const std::vector<double>& td,
                                                 double sigma, double b) {
  std::vector<std::size_t> out;
  const double ls = std::log(sigma);
  for (std::size_t n = 1; n <= inv.size(); ++n) {
    bool ok = true;
    double s = 0.0;
    for (std::size_t k = 1; k <= n && ok; ++k) {
      s += std::log(inv[n - k]) - ls;
      if (!(s <= 0.0)) ok = false;
      if (!(td[n - k] >= std::pow(sigma, b * static_cast<double>(k)))) ok = false;
    }
    if (ok) out.push_back(n);
  }
  return out;
}

inline double window_sum(const std::vector<double>& psi, std::size_t lo, std::size_t hi, double r) {
  double s = 0.0;
  for (std::size_t j = lo; j < hi; ++j) s += psi[j] - r;
  return s;
}

// Every suffix of the first n terms recomputed from scratch.
inline bool in_G(const std::vector<double>& psi, std::size_t n, double r) {
  for (std::size_t k = 0; k < n; ++k) {
    if (!(window_sum(psi, k, n, r) >= 0.0)) return false;
  }
  return true;
}

// All splits n = g + s with (x, g) in G and the tail bad or empty; the largest s wins.
inline viana::Decomposition decompose(const std::vector<double>& psi, std::size_t n, double r) {
  viana::Decomposition best{0, n, 0};
  for (std::size_t s = 0; s <= n; ++s) {
    const std::size_t g = n - s;
    const bool bad = s == 0 || window_sum(psi, g, n, r) < 0.0;
    if (bad && in_G(psi, g, r)) best = {0, g, s};
  }
  return best;
}

// Every subset of the cloud, keeping the (n, eps)-separated ones.
inline double partition_sum(const viana::SegmentCloud& c, double eps) {
  const std::size_t m = c.orbits.size();
  double best = -viana::kInf;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    bool sep = true;
    double s = 0.0;
    for (std::size_t a = 0; a < m && sep; ++a) {
      if (!(mask >> a & 1u)) continue;
      s += std::exp(c.weights[a]);
      for (std::size_t b = a + 1; b < m && sep; ++b) {
        if ((mask >> b & 1u) && viana::bowen_dist(c.orbits[a], c.orbits[b], c.n) < eps) sep = false;
      }
    }
    if (sep) best = std::max(best, std::log(s));
  }
  return best;
}

}  // namespace oracle
