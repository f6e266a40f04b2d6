#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "viana/parallel.hpp"
#include "viana/stats.hpp"
#include "viana/tangent.hpp"

namespace viana {

struct HypParams {
  double sigma = kNaN;  // in (0, 1)
  double delta = kNaN;
  double b = 0.25;
};

inline HypParams hyp_params(const ThermoConstants& c) { return {c.sigma, c.delta, c.b}; }

struct HypReport {
  std::vector<std::size_t> times;  // n in [1, N]
  std::size_t N = 0;
  double density = 0.0;
};

// n is a (sigma, delta)-hyperbolic time when for every 1 <= k <= n
//   prod_{j=n-k}^{n-1} inv_norm_j <= sigma^k  and  trunc_dist_{n-k} >= sigma^{b k}.
// Single pass: prefix minima for the first condition, a running maximum of
// the earliest admissible n for the second.
inline HypReport hyperbolic_times(std::span<const double> inv_norms, std::span<const double> trunc_dists,
                                  const HypParams& hp) {
  require(inv_norms.size() == trunc_dists.size(), "hyperbolic_times: size mismatch");
  require(hp.sigma > 0.0 && hp.sigma < 1.0, "hyperbolic_times: sigma must lie in (0, 1)");
  HypReport rep;
  rep.N = inv_norms.size();
  const double ls = std::log(hp.sigma);
  const double c = hp.b * ls;
  double P = 0.0, minP = kInf, reach = -kInf;
  bool blocked = false;
  for (std::size_t j = 0; j < rep.N; ++j) {
    minP = std::min(minP, P);
    const double a = std::log(inv_norms[j]) - ls;
    if (!std::isfinite(a) || blocked) {
      blocked = true;
    } else {
      P += a;
    }
    const double L = std::log(trunc_dists[j]);
    reach = std::max(reach, L == -kInf ? kInf : static_cast<double>(j) + L / c);
    const auto n = static_cast<double>(j + 1);
    if (!blocked && P <= minP && n >= reach) rep.times.push_back(j + 1);
  }
  rep.density = rep.N ? static_cast<double>(rep.times.size()) / static_cast<double>(rep.N) : 0.0;
  return rep;
}

inline std::vector<double> trunc_dists_of(const SystemParams& sp, const OrbitSegment& seg, double delta) {
  std::vector<double> out;
  out.reserve(seg.size());
  for (const auto& p : seg.points) out.push_back(trunc_dist(sp, p, delta));
  return out;
}

inline HypReport hyperbolic_times(const SystemParams& sp, const OrbitSegment& seg, const HypParams& hp) {
  const auto td = trunc_dists_of(sp, seg, hp.delta);
  return hyperbolic_times(seg.inv_norm, td, hp);
}

struct DensityCheck {
  double fraction_at_floor = 0.0;  // share of densities >= floor
  double nu_hat = 0.0;             // 1st percentile of densities
};

inline DensityCheck density_check(const std::vector<double>& densities, double floor) {
  DensityCheck c;
  if (densities.empty()) return c;
  std::size_t ok = 0;
  for (double v : densities) ok += v >= floor;
  c.fraction_at_floor = static_cast<double>(ok) / static_cast<double>(densities.size());
  c.nu_hat = percentile(densities, 1.0);
  return c;
}

// Points of x_0's orbit pulled back along its own branches from a point near x_n.
// Returns y_0 .. y_n, or empty when a branch is undefined.
inline std::vector<Point> pull_along(const SystemParams& sp, const OrbitSegment& seg, const TrackedPoint& yn,
                                     std::size_t n, TrackedPoint* y0 = nullptr) {
  std::vector<Point> chain(n + 1);
  chain[n] = yn.point();
  TrackedPoint y = yn;
  for (std::size_t k = n; k-- > 0;) {
    if (y.coded) {
      if (!pullback_inplace(sp, y, seg.digits[k], seg.points[k].t >= 0.0 ? 1 : -1)) return {};
    } else {
      auto p = pullback_like(sp, y, seg.points[k], seg.digits[k]);
      if (!p) return {};
      y = *p;
    }
    chain[k] = y.point();
  }
  if (y0) *y0 = y;
  return chain;
}

// Maximal one-step defect |f(y_k) - y_{k+1}| of a chain.
inline double chain_defect(const SystemParams& sp, const std::vector<Point>& chain) {
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < chain.size(); ++k) e = std::max(e, dist(apply(sp, chain[k]), chain[k + 1]));
  return e;
}

inline TrackedPoint offset_tracked(const SystemParams& sp, const Point& c, double du, double dv, std::uint64_t salt) {
  return track(sp, {wrap01(c.theta + du), c.t + dv}, salt);
}

struct ContractionReport {
  std::size_t tested = 0;
  std::size_t skipped = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max dist(y_{n-k}, z_{n-k}) / (sigma^{k/2} dist(y_n, z_n))
  double max_defect = 0.0;
};

// Backward contraction at a hyperbolic time n: for y, z in the pullback of
// B(x_n, radius) along x's branches,
//   dist(y_{n-k}, z_{n-k}) <= sigma^{k/2} dist(y_n, z_n) + slack.
inline ContractionReport contraction_check(const SystemParams& sp, const OrbitSegment& seg, std::size_t n,
                                           double radius, double sigma, std::size_t pairs, std::uint64_t seed,
                                           double slack = 1e-9) {
  require(n >= 1 && n <= seg.size(), "contraction_check: n out of range");
  ContractionReport rep;
  Rng g = make_rng(seed, "contraction", n);
  const Point xn = n < seg.size() ? seg.points[n] : seg.end.point();
  const double half_log_sigma = 0.5 * std::log(sigma);
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto yn = offset_tracked(sp, xn, uniform(g, -radius, radius), uniform(g, -radius, radius), g());
    const auto zn = offset_tracked(sp, xn, uniform(g, -radius, radius), uniform(g, -radius, radius), g());
    const auto cy = pull_along(sp, seg, yn, n);
    const auto cz = pull_along(sp, seg, zn, n);
    if (cy.empty() || cz.empty()) {
      ++rep.skipped;
      continue;
    }
    ++rep.tested;
    rep.max_defect = std::max({rep.max_defect, chain_defect(sp, cy), chain_defect(sp, cz)});
    const double dn = dist(cy[n], cz[n]);
    bool bad = false;
    for (std::size_t k = 1; k <= n; ++k) {
      const double bound = std::exp(half_log_sigma * static_cast<double>(k)) * dn;
      const double dk = dist(cy[n - k], cz[n - k]);
      if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, dk / bound);
      if (dk > bound + slack) bad = true;
    }
    rep.violations += bad;
  }
  return rep;
}

struct MembershipReport {
  bool member = false;
  bool cond_average = false;
  bool cond_recurrence = false;
  double avg_log_inv_norm = kNaN;
  std::vector<double> delta_for_gamma;  // NaN where no grid delta works
};

// Expanding-set membership: the average of log inv_norm is at most 3 log sigma,
// and for every gamma a grid delta has slow-recurrence statistic <= gamma.
inline MembershipReport expanding_membership(std::span<const double> inv_norms, std::span<const double> crit_dists,
                                             double sigma, const std::vector<double>& gamma_grid,
                                             const std::vector<double>& delta_grid) {
  MembershipReport m;
  double s = 0.0;
  for (double v : inv_norms) s += std::log(v);
  m.avg_log_inv_norm = inv_norms.empty() ? kNaN : s / static_cast<double>(inv_norms.size());
  m.cond_average = m.avg_log_inv_norm <= 3.0 * std::log(sigma);
  m.cond_recurrence = true;
  for (double gamma : gamma_grid) {
    double found = kNaN;
    for (double delta : delta_grid) {
      if (slow_recurrence_stat(crit_dists, delta) <= gamma) {
        found = std::isnan(found) ? delta : std::max(found, delta);
      }
    }
    m.delta_for_gamma.push_back(found);
    m.cond_recurrence = m.cond_recurrence && !std::isnan(found);
  }
  m.member = m.cond_average && m.cond_recurrence;
  return m;
}

inline std::vector<double> default_delta_grid() {
  return {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 1e-4, 1e-5, 1e-6};
}

// Largest grid delta whose slow-recurrence statistic is <= gamma on an SRB-proxy orbit.
inline double select_delta(const SystemParams& sp, double gamma, std::size_t N, std::uint64_t seed) {
  Rng g = make_rng(seed, "select_delta");
  TrackedPoint x = srb_sample(sp, g);
  std::vector<double> cd;
  cd.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    cd.push_back(crit_distance(sp, x.point()));
    step(sp, x);
  }
  for (double delta : default_delta_grid()) {
    if (slow_recurrence_stat(cd, delta) <= gamma) return delta;
  }
  throw NumericError("no delta on the grid reaches the slow-recurrence target");
}

// Hyperbolic times of SRB-proxy orbits for calibration and sampling.
struct HypSample {
  OrbitSegment seg;
  HypReport rep;
};

inline HypSample sample_hyperbolic(const SystemParams& sp, const HypParams& hp, std::size_t N, std::uint64_t seed) {
  Rng g = make_rng(seed, "hyp_sample");
  HypSample s;
  s.seg = make_segment(sp, srb_sample(sp, g), N);
  s.rep = hyperbolic_times(sp, s.seg, hp);
  return s;
}

// delta1 by halving from delta until a contraction scan on calibration
// orbits is clean, then one further halving.
inline double calibrate_delta1(const SystemParams& sp, const HypParams& hp, std::size_t orbits, std::size_t N,
                               std::size_t times_per_orbit, std::size_t pairs, std::uint64_t seed) {
  std::vector<HypSample> samples;
  for (std::size_t i = 0; i < orbits; ++i) samples.push_back(sample_hyperbolic(sp, hp, N, derive_seed(seed, "d1", i)));
  double radius = hp.delta;
  for (int it = 0; it < 40; ++it) {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < samples.size() && bad == 0; ++i) {
      const auto& ts = samples[i].rep.times;
      const std::size_t stride = std::max<std::size_t>(1, ts.size() / std::max<std::size_t>(1, times_per_orbit));
      for (std::size_t j = 0; j < ts.size() && bad == 0; j += stride) {
        bad += contraction_check(sp, samples[i].seg, ts[j], radius, hp.sigma, pairs, derive_seed(seed, "d1c", i)).violations;
      }
    }
    if (bad == 0) return 0.5 * radius;
    radius *= 0.5;
  }
  throw NumericError("delta1 calibration did not converge");
}

}  // namespace viana
