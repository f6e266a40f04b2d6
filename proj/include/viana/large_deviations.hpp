#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "viana/parallel.hpp"
#include "viana/potential.hpp"
#include "viana/pressure.hpp"
#include "viana/system.hpp"

namespace viana {

// Histogram on an nx-by-nt rectangular grid of S^1 x [lo, hi].
struct MeasureHistogram {
  std::size_t nx = 0, nt = 0;
  double lo = 0.0, hi = 1.0;
  std::vector<double> weights;

  MeasureHistogram() = default;
  MeasureHistogram(std::size_t nx_, std::size_t nt_, double lo_, double hi_)
      : nx(nx_), nt(nt_), lo(lo_), hi(hi_), weights(nx_ * nt_, 0.0) {
    require(nx_ >= 1 && nt_ >= 1 && hi_ > lo_, "MeasureHistogram: bad grid");
  }

  std::size_t cell(const Point& p) const {
    auto i = static_cast<std::size_t>(wrap01(p.theta) * static_cast<double>(nx));
    const double u = (p.t - lo) / (hi - lo);
    auto j = static_cast<std::size_t>(std::clamp(u, 0.0, 1.0) * static_cast<double>(nt));
    return std::min(i, nx - 1) * nt + std::min(j, nt - 1);
  }
  void add(const Point& p, double w) { weights[cell(p)] += w; }
  double total() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
  std::vector<double> theta_marginal() const {
    std::vector<double> m(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < nt; ++j) m[i] += weights[i * nt + j];
    }
    return m;
  }
  std::size_t support() const {
    return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
  }
};

inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "tv_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

// E_n(x) = (1/n) sum_{k<n} delta_{f^k x}.
inline MeasureHistogram empirical_measure(const SystemParams& sp, const TrackedPoint& x, std::size_t n, std::size_t nx,
                                          std::size_t nt) {
  require(n >= 1, "empirical_measure: n must be >= 1");
  MeasureHistogram h(nx, nt, sp.trap_lo, sp.trap_hi);
  TrackedPoint y = x;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    h.add(y.point(), w);
    step(sp, y);
  }
  return h;
}

// {nu : int observable d nu in [lo, hi]}.
struct Slab {
  Potential observable;
  double lo = -kInf;
  double hi = kInf;
};

// Conjunction of slabs; closed and convex.
struct ConstraintSet {
  std::vector<Slab> slabs;
  std::string description;

  bool contains(const std::vector<double>& means) const {
    for (std::size_t i = 0; i < slabs.size(); ++i) {
      if (means[i] < slabs[i].lo || means[i] > slabs[i].hi) return false;
    }
    return true;
  }
};

struct DeviationPoint {
  std::size_t n = 0;
  std::size_t hits = 0;
  std::size_t seeds = 0;
  double p = 0.0;
  bool bound_only = false;  // zero hits: p = 3 / seeds
};

// Deviation probabilities for several constraints on a shared sample of
// SRB-proxy seeds (same orbits for every constraint and every n).
// Result indexed [constraint][n].
inline std::vector<std::vector<DeviationPoint>> deviation_probabilities(
    const SystemParams& sp, const std::vector<ConstraintSet>& sets, const std::vector<std::size_t>& n_grid,
    std::size_t seeds, std::uint64_t master, std::size_t threads = 0, int burn_in = 200) {
  require(!n_grid.empty() && seeds >= 1, "deviation_probabilities: empty grid or sample");
  const std::size_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  const std::size_t C = sets.size(), G = n_grid.size();
  std::vector<unsigned char> hit(seeds * C * G, 0);
  parallel_for(
      seeds,
      [&](std::size_t i) {
        Rng g = make_rng(derive_seed(master, "ldp_seed", i), "srb");
        TrackedPoint x = srb_sample(sp, g, burn_in);
        std::vector<Point> pts(n_max);
        for (auto& p : pts) {
          p = x.point();
          step(sp, x);
        }
        for (std::size_t c = 0; c < C; ++c) {
          const auto& slabs = sets[c].slabs;
          std::vector<double> sums(slabs.size(), 0.0);
          std::size_t k = 0;
          for (std::size_t gi = 0; gi < G; ++gi) {
            // n_grid need not be sorted
            std::fill(sums.begin(), sums.end(), 0.0);
            for (k = 0; k < n_grid[gi]; ++k) {
              for (std::size_t s = 0; s < slabs.size(); ++s) sums[s] += slabs[s].observable(pts[k]);
            }
            for (auto& v : sums) v /= static_cast<double>(n_grid[gi]);
            hit[(i * C + c) * G + gi] = sets[c].contains(sums);
          }
        }
      },
      threads);
  std::vector<std::vector<DeviationPoint>> out(C, std::vector<DeviationPoint>(G));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t gi = 0; gi < G; ++gi) {
      DeviationPoint& d = out[c][gi];
      d.n = n_grid[gi];
      d.seeds = seeds;
      for (std::size_t i = 0; i < seeds; ++i) d.hits += hit[(i * C + c) * G + gi];
      d.bound_only = d.hits == 0;
      d.p = d.bound_only ? 3.0 / static_cast<double>(seeds) : static_cast<double>(d.hits) / static_cast<double>(seeds);
    }
  }
  return out;
}

struct DecayFit {
  double rate = kNaN;  // slope of log p against n
  double intercept = kNaN;
  double residual = kNaN;
  bool upper_bound = false;  // every point was a confidence bound
  std::size_t points = 0;
};

inline DecayFit decay_rate_fit(const std::vector<DeviationPoint>& pts) {
  std::size_t usable = 0;
  bool all_bounds = true;
  std::vector<double> xs, ys;
  for (const auto& d : pts) {
    if (!(d.p > 0.0)) continue;
    ++usable;
    all_bounds = all_bounds && d.bound_only;
    xs.push_back(static_cast<double>(d.n));
    ys.push_back(std::log(d.p));
  }
  if (usable < 4) throw NumericError("decay_rate_fit: fewer than 4 usable n values");
  const auto f = linear_fit(xs, ys);
  return {f.slope, f.intercept, f.rms_residual, all_bounds, usable};
}

struct RateCandidate {
  std::string name;
  std::vector<double> means;  // one per slab
  double entropy = kNaN;
  double integral = kNaN;    // int phi
  double value = kNaN;       // entropy + integral - P_top
  bool in_set = false;
};

struct RateBound {
  double bound = -kInf;
  double p_top = kNaN;
  std::string best;
  std::vector<RateCandidate> table;  // includes accepted convex combinations
  double nearest_mean_gap = kInf;    // distance of the closest candidate to the constraint
  bool heuristic = true;             // a lower estimate of the true supremum
};

namespace detail {

inline double slab_gap(const ConstraintSet& A, const std::vector<double>& m) {
  double g = 0.0;
  for (std::size_t i = 0; i < A.slabs.size(); ++i) {
    g = std::max({g, A.slabs[i].lo - m[i], m[i] - A.slabs[i].hi});
  }
  return g;
}

}  // namespace detail

// max over candidates (and pairwise convex combinations) with means in A of
// h + int phi - P_top.  Entropy and means are affine in the mixing weight,
// so the best mixture sits at an end of the feasible weight interval.
inline RateBound rate_upper_bound(const ConstraintSet& A, std::vector<RateCandidate> cands, double p_top) {
  RateBound rb;
  rb.p_top = p_top;
  auto consider = [&](RateCandidate c) {
    c.value = c.entropy + c.integral - p_top;
    c.in_set = A.contains(c.means);
    rb.nearest_mean_gap = std::min(rb.nearest_mean_gap, detail::slab_gap(A, c.means));
    if (c.in_set && c.value > rb.bound) {
      rb.bound = c.value;
      rb.best = c.name;
    }
    rb.table.push_back(std::move(c));
  };
  const std::size_t base = cands.size();
  for (const auto& c : cands) consider(c);
  for (std::size_t i = 0; i < base; ++i) {
    for (std::size_t j = i + 1; j < base; ++j) {
      const auto& u = cands[i];
      const auto& v = cands[j];
      // weight w on u: mean = w u + (1 - w) v; feasible w is an interval
      double wlo = 0.0, whi = 1.0;
      for (std::size_t s = 0; s < A.slabs.size() && wlo <= whi; ++s) {
        const double a = u.means[s] - v.means[s];
        const double lo = A.slabs[s].lo - v.means[s], hi = A.slabs[s].hi - v.means[s];
        if (a == 0.0) {
          if (0.0 < lo || 0.0 > hi) wlo = 1.0, whi = 0.0;
          continue;
        }
        double w1 = lo / a, w2 = hi / a;
        if (w1 > w2) std::swap(w1, w2);
        wlo = std::max(wlo, w1);
        whi = std::min(whi, w2);
      }
      if (wlo > whi) continue;
      for (double w : {wlo, whi}) {
        if (w <= 0.0 || w >= 1.0) continue;
        RateCandidate c;
        c.name = u.name + " + " + v.name;
        for (std::size_t s = 0; s < A.slabs.size(); ++s) c.means.push_back(w * u.means[s] + (1.0 - w) * v.means[s]);
        // clamp rounding at the slab edge
        for (std::size_t s = 0; s < A.slabs.size(); ++s) c.means[s] = std::clamp(c.means[s], A.slabs[s].lo, A.slabs[s].hi);
        c.entropy = w * u.entropy + (1.0 - w) * v.entropy;
        c.integral = w * u.integral + (1.0 - w) * v.integral;
        consider(std::move(c));
      }
    }
  }
  return rb;
}

struct LdpBudget {
  std::vector<std::size_t> n_grid{10, 20, 30, 40};
  std::size_t seeds = 20000;
  TreeBudget tree{};
  std::size_t srb_orbit = 20000;
  std::size_t entropy_refs = 400;
  std::size_t entropy_window = 3;
  int max_period = 2;

  LdpBudget doubled() const {
    LdpBudget b = *this;
    b.seeds *= 2;
    b.tree = tree.doubled();
    b.srb_orbit *= 2;
    b.entropy_refs *= 2;
    return b;
  }
};

struct LdpScenario {
  std::string name;
  ConstraintSet constraint;
  Potential phi = constant_potential(0.0);
  LdpBudget budget;
  std::uint64_t seed = 1;
};

struct LdpAttempt {
  std::vector<DeviationPoint> probabilities;
  DecayFit fit;
  RateBound bound;
  bool pass = false;
};

struct LdpReport {
  std::string name;
  double tolerance = 0.1;
  LdpAttempt first;
  LdpAttempt doubled;
  bool used_doubled = false;
  bool pass = false;
  const LdpAttempt& final() const { return used_doubled ? doubled : first; }
};

namespace detail {

inline std::vector<double> slab_means(const ConstraintSet& A, const std::vector<Point>& orbit) {
  std::vector<double> m;
  for (const auto& s : A.slabs) {
    double acc = 0.0;
    for (const auto& p : orbit) acc += s.observable(p);
    m.push_back(acc / static_cast<double>(orbit.size()));
  }
  return m;
}

inline std::vector<RateCandidate> ldp_candidates(const SystemParams& sp, const LdpScenario& sc, const LdpBudget& b,
                                                 double p_top) {
  std::vector<RateCandidate> out;
  // SRB proxy: one long typical orbit
  Rng g = make_rng(sc.seed, "ldp_srb");
  TrackedPoint x = srb_sample(sp, g);
  std::vector<Point> orbit(b.srb_orbit);
  for (auto& p : orbit) {
    p = x.point();
    step(sp, x);
  }
  const auto mp = measure_pressure_proxy(orbit, sc.phi, b.tree.eps, b.entropy_window, b.entropy_refs, sc.seed);
  out.push_back({"srb_proxy", slab_means(sc.constraint, orbit), mp.entropy, mp.integral});
  // periodic-orbit measures
  for (int p = 1; p <= b.max_period; ++p) {
    const auto pp = find_periodic_points(sp, p);
    std::vector<bool> used(pp.points.size(), false);
    for (std::size_t i = 0; i < pp.points.size(); ++i) {
      if (used[i]) continue;
      std::vector<Point> cyc{pp.points[i]};
      Point y = pp.points[i];
      for (int k = 1; k < p; ++k) {
        y = apply(sp, y);
        cyc.push_back(y);
        for (std::size_t j = 0; j < pp.points.size(); ++j) {
          if (!used[j] && dist(pp.points[j], y) < 1e-7) used[j] = true;
        }
      }
      used[i] = true;
      if (p > 1 && dist(apply(sp, cyc.back()), cyc.front()) > 1e-7) continue;
      bool prime = true;
      for (std::size_t k = 1; k < cyc.size(); ++k) prime = prime && dist(cyc[k], cyc[0]) > 1e-7;
      if (!prime) continue;
      double s = 0.0;
      for (const auto& q : cyc) s += sc.phi(q);
      out.push_back({"periodic_p" + std::to_string(p) + "_" + std::to_string(i), slab_means(sc.constraint, cyc), 0.0,
                     s / static_cast<double>(cyc.size())});
    }
  }
  // conditioned-orbit tree: segments whose averages lie in A
  if (sc.constraint.slabs.size() == 1 && !sp.perturbed()) {
    const auto& slab = sc.constraint.slabs.front();
    PathFilter f;
    f.observable = slab.observable.fn;
    f.obs_lo = slab.lo;
    f.obs_hi = slab.hi;
    try {
      const auto est = pressure_estimate(sp, sc.phi, f, b.tree);
      if (!est.empty) {
        RateCandidate c{"conditioned_tree", {std::clamp(0.5 * (slab.lo + slab.hi), slab.lo, slab.hi)}, est.value, 0.0};
        if (!std::isfinite(c.means[0])) c.means[0] = std::isfinite(slab.hi) ? slab.hi : slab.lo;
        out.push_back(c);
      }
    } catch (const NumericError&) {
    }
  }
  (void)p_top;
  return out;
}

inline LdpAttempt ldp_attempt(const SystemParams& sp, const LdpScenario& sc, const LdpBudget& b, double tol,
                              std::size_t threads) {
  LdpAttempt a;
  a.probabilities = deviation_probabilities(sp, {sc.constraint}, b.n_grid, b.seeds, sc.seed, threads).front();
  a.fit = decay_rate_fit(a.probabilities);
  const double p_top = pressure_estimate(sp, sc.phi, PathFilter{}, b.tree).value;
  a.bound = rate_upper_bound(sc.constraint, ldp_candidates(sp, sc, b, p_top), p_top);
  a.pass = a.fit.rate <= a.bound.bound + tol || (a.bound.bound == -kInf && a.fit.upper_bound);
  return a;
}

}  // namespace detail

// Empirical decay rate against the candidate rate bound; on failure the
// whole comparison is rerun at doubled budget and that verdict is final.
inline LdpReport ldp_check(const SystemParams& sp, const LdpScenario& sc, double tolerance = 0.1,
                           std::size_t threads = 0) {
  LdpReport rep;
  rep.name = sc.name;
  rep.tolerance = tolerance;
  rep.first = detail::ldp_attempt(sp, sc, sc.budget, tolerance, threads);
  rep.pass = rep.first.pass;
  if (!rep.pass) {
    rep.doubled = detail::ldp_attempt(sp, sc, sc.budget.doubled(), tolerance, threads);
    rep.used_doubled = true;
    rep.pass = rep.doubled.pass;
  }
  return rep;
}

struct ObservableStats {
  double mean = kNaN;
  double std_of_average = kNaN;
};

// Mean of an observable under the SRB proxy and the spread of its n-averages.
inline ObservableStats observable_stats(const SystemParams& sp, const Potential& obs, std::size_t n,
                                        std::size_t samples, std::uint64_t seed, std::size_t threads = 0) {
  std::vector<double> avgs(samples);
  parallel_for(
      samples,
      [&](std::size_t i) {
        Rng g = make_rng(derive_seed(seed, "obs_stats", i), "srb");
        TrackedPoint x = srb_sample(sp, g, 200);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          s += obs(x.point());
          step(sp, x);
        }
        avgs[i] = s / static_cast<double>(n);
      },
      threads);
  return {mean(avgs), stddev(avgs)};
}

// The shipped scenarios: phi = 0, interval (-inf, mean - 3 std] for the
// truncated center observable and for cos(2 pi theta).
inline std::vector<LdpScenario> default_ldp_scenarios(const SystemParams& sp, const LdpBudget& b, std::uint64_t seed,
                                                      double psi_floor = -4.0, std::size_t threads = 0) {
  std::vector<LdpScenario> out;
  const std::size_t n_max = *std::max_element(b.n_grid.begin(), b.n_grid.end());
  const Potential obs[] = {truncated_psi_potential(1.0, psi_floor), cos_potential(1.0)};
  for (const auto& o : obs) {
    const auto st = observable_stats(sp, o, n_max, 4000, derive_seed(seed, "ldp_stats", out.size()), threads);
    LdpScenario sc;
    sc.name = o.name + "_below_mean";
    sc.constraint.slabs.push_back({o, -kInf, st.mean - 3.0 * st.std_of_average});
    sc.constraint.description = o.name + " average <= mean - 3 std";
    sc.budget = b;
    sc.seed = derive_seed(seed, "ldp_scenario", out.size());
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace viana
