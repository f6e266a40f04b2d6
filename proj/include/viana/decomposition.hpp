#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "viana/hyperbolic.hpp"

namespace viana {

// (x, n) lies in G when every suffix sum of psi - r over the first n terms is >= 0.
inline bool in_G(std::span<const double> psi, std::size_t n, double r) {
  require(n <= psi.size(), "in_G: n exceeds the sequence");
  double s = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    if (psi[j] == -kInf) return false;
    s += psi[j] - r;
    if (s < 0.0) return false;
  }
  return true;
}

// (x, n) lies in S when the full sum of psi - r over n terms is < 0.
inline bool in_S(std::span<const double> psi, std::size_t n, double r) {
  require(n <= psi.size(), "in_S: n exceeds the sequence");
  double s = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    if (psi[j] == -kInf) return true;
    s += psi[j] - r;
  }
  return n > 0 && s < 0.0;
}

// (x, n) = (x, p) + (f^p x, g) + (f^{p+g} x, s): s is the largest bad suffix, p = 0.
struct Decomposition {
  std::size_t p = 0;
  std::size_t g = 0;
  std::size_t s = 0;
};

inline Decomposition decompose(std::span<const double> psi, std::size_t n, double r) {
  require(n <= psi.size(), "decompose: n exceeds the sequence");
  double q = 0.0;
  std::size_t s = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double v = psi[n - k];
    q = v == -kInf ? -kInf : q + (v - r);
    if (q < 0.0) s = k;
  }
  return {0, n - s, s};
}

struct BackwardContractionReport {
  bool in_g = false;
  std::size_t tested = 0;
  std::size_t outside_ball = 0;  // companions that left B_n(x, eps)
  std::size_t skipped = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max dist(f^k x, f^k y) / (e^{-r(n-k)} dist(f^n x, f^n y))
  double max_defect = 0.0;
};

// For (x, n) in G and y in B_n(x, eps) taken as pullbacks of points near f^n x:
//   dist(f^k x, f^k y) <= e^{-r(n-k)} dist(f^n x, f^n y) + slack,  0 <= k <= n.
inline BackwardContractionReport backward_contraction_check(const SystemParams& sp, const OrbitSegment& seg,
                                                            std::size_t n, double r, double eps,
                                                            double max_offset, std::size_t pairs,
                                                            std::uint64_t seed, double slack = 1e-9) {
  require(n >= 1 && n <= seg.size(), "backward_contraction_check: n out of range");
  BackwardContractionReport rep;
  rep.in_g = in_G(seg.psi, n, r);
  if (!rep.in_g) return rep;
  Rng g = make_rng(seed, "lemma_contraction", n);
  const Point xn = n < seg.size() ? seg.points[n] : seg.end.point();
  for (std::size_t i = 0; i < pairs; ++i) {
    const double rad = max_offset * std::pow(10.0, -6.0 * uniform01(g));
    const auto yn = offset_tracked(sp, xn, uniform(g, -rad, rad), uniform(g, -rad, rad), g());
    const auto cy = pull_along(sp, seg, yn, n);
    if (cy.empty()) {
      ++rep.skipped;
      continue;
    }
    bool inside = true;
    for (std::size_t k = 0; k < n && inside; ++k) inside = dist(cy[k], seg.points[k]) < eps;
    if (!inside) {
      ++rep.outside_ball;
      continue;
    }
    ++rep.tested;
    rep.max_defect = std::max(rep.max_defect, chain_defect(sp, cy));
    const double dn = dist(cy[n], xn);
    bool bad = false;
    for (std::size_t k = 0; k <= n; ++k) {
      const double bound = std::exp(-r * static_cast<double>(n - k)) * dn;
      const double dk = k < n ? dist(cy[k], seg.points[k]) : dn;
      if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, dk / bound);
      if (dk > bound + slack) bad = true;
    }
    rep.violations += bad;
  }
  return rep;
}

}  // namespace viana
