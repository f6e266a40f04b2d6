#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "viana/decomposition.hpp"

namespace viana {

// Hölder potential phi with |phi(x) - phi(y)| <= K dist(x, y)^alpha.
struct Potential {
  std::string name;
  std::function<double(const Point&)> fn;
  double K = 0.0;
  double alpha = 1.0;
  bool base_only = false;  // depends on theta only

  double operator()(const Point& p) const { return fn(p); }
};

inline Potential constant_potential(double c) {
  return {"constant", [c](const Point&) { return c; }, 0.0, 1.0, true};
}

inline Potential cos_potential(double amp) {
  return {"cos", [amp](const Point& p) { return amp * std::cos(kTwoPi * p.theta); }, kTwoPi * std::abs(amp), 1.0,
          true};
}

inline Potential linear_t_potential(double c) {
  return {"linear_t", [c](const Point& p) { return c * p.t; }, std::abs(c), 1.0, false};
}

// q * max(log|2t|, floor): the center observable truncated below (skew mode).
inline Potential truncated_psi_potential(double q, double floor) {
  return {"psi_c_truncated",
          [q, floor](const Point& p) {
            const double v = p.t == 0.0 ? -kInf : std::log(2.0 * std::abs(p.t));
            return q * std::max(v, floor);
          },
          2.0 * std::abs(q) * std::exp(-floor), 1.0, false};
}

struct HolderCheck {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  bool ok = true;
};

// Samples pairs in S^1 x I and compares increments with K dist^alpha.
inline HolderCheck holder_check(const SystemParams& sp, const Potential& phi, std::size_t pairs, std::uint64_t seed) {
  HolderCheck h;
  Rng g = make_rng(seed, "holder");
  for (std::size_t i = 0; i < pairs; ++i) {
    const Point x{uniform01(g), uniform(g, sp.trap_lo, sp.trap_hi)};
    const double r = std::pow(10.0, uniform(g, -8.0, -0.5));
    const Point y{wrap01(x.theta + uniform(g, -r, r)), std::clamp(x.t + uniform(g, -r, r), sp.trap_lo, sp.trap_hi)};
    const double dxy = dist(x, y);
    const double dv = std::abs(phi(x) - phi(y));
    if (dxy == 0.0 || !std::isfinite(dv)) continue;
    ++h.pairs;
    const double bound = phi.K * std::pow(dxy, phi.alpha);
    h.worst_ratio = std::max(h.worst_ratio, dv / bound);
    // rounding in phi(x) - phi(y)
    const double slack = 1e-9 * bound + 1e-15 * (std::abs(phi(x)) + std::abs(phi(y)) + 1.0);
    if (dv > bound + slack) ++h.violations;
  }
  h.ok = h.violations == 0;
  return h;
}

// User potential; rejected when the declared Hölder constants fail on sampled pairs.
inline Potential make_potential(const SystemParams& sp, std::string name, std::function<double(const Point&)> fn,
                                double K, double alpha, std::uint64_t seed = 1) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(K >= 0.0)) throw ConfigError("potential: need K >= 0 and alpha in (0, 1]");
  Potential phi{std::move(name), std::move(fn), K, alpha, false};
  const auto h = holder_check(sp, phi, 10000, seed);
  if (!h.ok) throw ConfigError("potential '" + phi.name + "' violates its declared Hölder constants");
  return phi;
}

struct Oscillation {
  double value = kNaN;
  double refinement_bound = kNaN;  // K res^alpha
  std::size_t sentinels = 0;       // non-finite evaluations left out
};

inline Oscillation oscillation(const SystemParams& sp, const Potential& phi, double resolution = 1e-3) {
  Oscillation o;
  const auto nth = static_cast<std::size_t>(std::ceil(1.0 / resolution));
  const auto nt = phi.base_only ? 1 : static_cast<std::size_t>(std::ceil((sp.trap_hi - sp.trap_lo) / resolution)) + 1;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < nth; ++i) {
    const double th = static_cast<double>(i) / static_cast<double>(nth);
    for (std::size_t j = 0; j < nt; ++j) {
      const double t = nt == 1 ? 0.0 : sp.trap_lo + (sp.trap_hi - sp.trap_lo) * static_cast<double>(j) / static_cast<double>(nt - 1);
      const double v = phi({th, t});
      if (!std::isfinite(v)) {
        ++o.sentinels;
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  o.value = hi - lo;
  o.refinement_bound = phi.K * std::pow(resolution, phi.alpha);
  return o;
}

struct Admissibility {
  bool admissible = false;
  bool undecidable = false;
  double oscillation = kNaN;
  double threshold = kNaN;  // c0/2 - log((d + eps_hat)/(d - eps_hat))
  double margin = kNaN;
};

inline Admissibility admissible(const SystemParams& sp, const Potential& phi, double resolution = 1e-3) {
  const auto& c = sp.constants;
  require(std::isfinite(c.c0_estimate) && std::isfinite(c.eps_hat), "admissible: constants not calibrated");
  Admissibility a;
  const auto osc = oscillation(sp, phi, resolution);
  a.oscillation = osc.value;
  a.threshold = 0.5 * c.c0_estimate - std::log((sp.d + c.eps_hat) / (sp.d - c.eps_hat));
  a.margin = a.threshold - a.oscillation;
  a.undecidable = std::abs(a.margin) < osc.refinement_bound;
  a.admissible = !a.undecidable && a.margin > 0.0;
  return a;
}

inline double birkhoff_sum(const Potential& phi, std::span<const Point> pts) {
  double s = 0.0;
  for (const auto& p : pts) s += phi(p);
  return s;
}

// G-segment of an SRB-proxy orbit: the good part of the decomposition of (x, n).
inline std::optional<OrbitSegment> sample_good_segment(const SystemParams& sp, double r, std::size_t n_max,
                                                       std::size_t n_min, Rng& g) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::size_t n = n_min + uniform_index(g, n_max - n_min + 1);
    auto seg = make_segment(sp, srb_sample(sp, g, 200), n);
    const auto dec = decompose(seg.psi, n, r);
    if (dec.g >= n_min) {
      if (dec.g < n) seg = make_segment(sp, seg.start, dec.g);
      return seg;
    }
  }
  return std::nullopt;
}

struct BowenReport {
  std::size_t segments = 0;
  std::size_t companions = 0;
  double empirical_sup = 0.0;
  double analytic_bound = kNaN;  // K eps^alpha / (1 - e^{-r alpha})
  bool ok = false;
};

// sup |S_n phi(x) - S_n phi(y)| over y in B_n(x, eps) for sampled (x, n) in G.
inline BowenReport bowen_constant_estimate(const SystemParams& sp, const Potential& phi, double r, double eps,
                                           std::size_t segments, std::size_t n_max, std::size_t companions,
                                           std::uint64_t seed) {
  BowenReport rep;
  rep.analytic_bound = phi.K * std::pow(eps, phi.alpha) / (1.0 - std::exp(-r * phi.alpha));
  Rng g = make_rng(seed, "bowen");
  for (std::size_t s = 0; s < segments; ++s) {
    auto seg = sample_good_segment(sp, r, n_max, std::min<std::size_t>(2, n_max), g);
    if (!seg) continue;
    ++rep.segments;
    const std::size_t n = seg->size();
    const double sx = birkhoff_sum(phi, seg->points);
    // y_{n-1} near x_{n-1}, pulled back along x's branches.
    for (std::size_t c = 0; c < companions; ++c) {
      const double rad = eps * uniform01(g);
      const auto yl = offset_tracked(sp, seg->points[n - 1], uniform(g, -rad, rad), uniform(g, -rad, rad), g());
      const auto chain = pull_along(sp, *seg, yl, n - 1);
      if (chain.empty()) continue;
      bool inside = true;
      for (std::size_t k = 0; k < n && inside; ++k) inside = dist(chain[k], seg->points[k]) < eps;
      if (!inside) continue;
      ++rep.companions;
      rep.empirical_sup = std::max(rep.empirical_sup, std::abs(sx - birkhoff_sum(phi, chain)));
    }
  }
  rep.ok = rep.empirical_sup <= rep.analytic_bound;
  return rep;
}

}  // namespace viana
