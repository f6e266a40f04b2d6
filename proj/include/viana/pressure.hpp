#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "viana/potential.hpp"
#include "viana/system.hpp"

namespace viana {

inline double bowen_dist(std::span<const Point> a, std::span<const Point> b, std::size_t n) {
  require(a.size() >= n && b.size() >= n, "bowen_dist: orbits shorter than n");
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, dist(a[k], b[k]));
  return m;
}

// Finite family of length-n orbit segments with weights S_n phi.
struct SegmentCloud {
  std::size_t n = 0;
  std::vector<std::vector<Point>> orbits;
  std::vector<double> weights;
};

enum class SeparationStrategy { greedy_weight, farthest_point };

// Maximal (n, eps)-separated subset of the cloud.
inline std::vector<std::size_t> separated_set(const SegmentCloud& c, double eps, SeparationStrategy strategy) {
  const std::size_t m = c.orbits.size();
  std::vector<std::size_t> chosen;
  if (m == 0) return chosen;
  auto far = [&](std::size_t i) {
    for (std::size_t j : chosen) {
      if (bowen_dist(c.orbits[i], c.orbits[j], c.n) < eps) return false;
    }
    return true;
  };
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return c.weights[a] > c.weights[b]; });
  if (strategy == SeparationStrategy::greedy_weight) {
    for (std::size_t i : order) {
      if (far(i)) chosen.push_back(i);
    }
    return chosen;
  }
  std::vector<double> gap(m, kInf);
  std::size_t cur = order.front();
  for (;;) {
    chosen.push_back(cur);
    for (std::size_t i = 0; i < m; ++i) gap[i] = std::min(gap[i], bowen_dist(c.orbits[i], c.orbits[cur], c.n));
    std::size_t best = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (gap[i] >= eps && (best == m || gap[i] > gap[best])) best = i;
    }
    if (best == m) break;
    cur = best;
  }
  return chosen;
}

struct PartitionSum {
  double log_value = -kInf;
  std::vector<std::size_t> chosen;
  bool exact = false;
};

namespace detail {

// Maximum-weight independent set of the eps-closeness graph (m <= 30).
inline std::vector<std::size_t> exact_mwis(const SegmentCloud& c, double eps) {
  const std::size_t m = c.orbits.size();
  const double wmax = *std::max_element(c.weights.begin(), c.weights.end());
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return c.weights[a] > c.weights[b]; });
  std::vector<double> w(m);
  std::vector<std::uint32_t> adj(m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    w[a] = std::exp(c.weights[order[a]] - wmax);
    for (std::size_t b = 0; b < m; ++b) {
      if (a != b && bowen_dist(c.orbits[order[a]], c.orbits[order[b]], c.n) < eps) adj[a] |= 1u << b;
    }
  }
  std::vector<double> rest(m + 1, 0.0);
  for (std::size_t a = m; a-- > 0;) rest[a] = rest[a + 1] + w[a];
  double best = -1.0;
  std::uint32_t best_mask = 0;
  std::function<void(std::size_t, std::uint32_t, std::uint32_t, double)> go =
      [&](std::size_t i, std::uint32_t mask, std::uint32_t blocked, double val) {
        if (val + rest[i] <= best) return;
        if (i == m) {
          best = val;
          best_mask = mask;
          return;
        }
        if (!(blocked >> i & 1u)) go(i + 1, mask | 1u << i, blocked | adj[i], val + w[i]);
        go(i + 1, mask, blocked, val);
      };
  go(0, 0, 0, 0.0);
  std::vector<std::size_t> chosen;
  for (std::size_t a = 0; a < m; ++a) {
    if (best_mask >> a & 1u) chosen.push_back(order[a]);
  }
  return chosen;
}

}  // namespace detail

// log sum over an (n, eps)-separated subset of e^{S_n phi}: exact optimum for
// small clouds, otherwise the better of the two greedy strategies.
inline PartitionSum partition_sum(const SegmentCloud& c, double eps, std::size_t exact_limit = 20) {
  PartitionSum ps;
  if (c.orbits.empty()) return ps;
  auto value = [&](const std::vector<std::size_t>& s) {
    LogSumExp acc;
    for (auto i : s) acc.add(c.weights[i]);
    return acc.value();
  };
  if (c.orbits.size() <= std::min<std::size_t>(exact_limit, 30)) {
    ps.chosen = detail::exact_mwis(c, eps);
    ps.exact = true;
  } else {
    auto a = separated_set(c, eps, SeparationStrategy::greedy_weight);
    auto b = separated_set(c, eps, SeparationStrategy::farthest_point);
    ps.chosen = value(a) >= value(b) ? std::move(a) : std::move(b);
  }
  ps.log_value = value(ps.chosen);
  return ps;
}

enum class Collection { all, good, bad };

inline const char* to_string(Collection c) {
  switch (c) {
    case Collection::all: return "ALL";
    case Collection::good: return "G";
    case Collection::bad: return "S";
  }
  return "?";
}

// Which segments (x, n) enter the sum.
struct PathFilter {
  Collection collection = Collection::all;
  double r = 0.0;
  std::function<double(const Point&)> observable;  // optional: average must lie in [obs_lo, obs_hi]
  double obs_lo = -kInf;
  std::function<double(const Point&)> center;  // psi^c override (skew default log|2t|)
  double obs_hi = kInf;
};

struct TreeBudget {
  double eps = 0.05;
  int n_lo = 8;
  int n_hi = 16;
  std::size_t end_points = 2048;
  std::size_t digit_samples = 1;
  bool base_only = false;
  std::uint64_t seed = 1;

  TreeBudget doubled() const {
    TreeBudget b = *this;
    b.end_points *= 2;
    b.digit_samples *= 2;
    return b;
  }
};

struct PressureRow {
  int n = 0;
  double log_sum = -kInf;    // log Lambda_n
  double log_count = -kInf;  // log of the separated-set size
};

struct PressureEstimate {
  double value = kNaN;  // slope of log Lambda_n in n
  double residual = kNaN;
  double eps = kNaN;
  bool empty = false;  // no segment passed the filter at any n
  std::size_t dropped = 0;
  std::size_t sample_size = 0;
  std::string method;
  std::vector<PressureRow> rows;
};

namespace detail {

class TreeWalker {
 public:
  TreeWalker(const SystemParams& sp, const Potential& phi, const PathFilter& f, double eps, int n,
             const std::vector<int>& digits, bool base_only)
      : sp_(sp), phi_(phi), f_(f), eps_(eps), n_(n), digits_(digits), base_only_(base_only) {
    need_psi_ = f.collection != Collection::all;
  }

  void walk(const Point& p, int depth, double sphi, double sexc, double sobs) {
    sphi += phi_(p);
    if (need_psi_) {
      const double psi = f_.center ? f_.center(p) : (p.t == 0.0 ? -kInf : std::log(2.0 * std::abs(p.t)));
      sexc = psi == -kInf ? -kInf : sexc + (psi - f_.r);
      if (f_.collection == Collection::good && sexc < 0.0) return;
    }
    if (f_.observable) sobs += f_.observable(p);
    if (depth == n_ - 1) {
      if (f_.collection == Collection::bad && !(sexc < 0.0)) return;
      if (f_.observable) {
        const double avg = sobs / n_;
        if (avg < f_.obs_lo || avg > f_.obs_hi) return;
      }
      weight_.add(sphi);
      count_.add(0.0);
      return;
    }
    const double th = (p.theta + digits_[depth]) / sp_.d;
    if (base_only_) {
      walk({th, 0.0}, depth + 1, sphi, sexc, sobs);
      return;
    }
    const double rad = sp_.a0 + sp_.alpha * std::sin(kTwoPi * th) - p.t;
    if (rad < 0.0) return;
    const double s = std::sqrt(rad);
    if (s <= sp_.trap_hi) walk({th, s}, depth + 1, sphi, sexc, sobs);
    if (s >= 0.5 * eps_ && -s >= sp_.trap_lo) walk({th, -s}, depth + 1, sphi, sexc, sobs);
  }

  LogSumExp weight_, count_;

 private:
  const SystemParams& sp_;
  const Potential& phi_;
  const PathFilter& f_;
  double eps_;
  int n_;
  const std::vector<int>& digits_;
  bool base_only_;
  bool need_psi_ = false;
};

// eps-separated end set: the offset lattice of spacing eps over S^1 x I,
// thinned to at most end_points by a fixed stride.
inline std::vector<Point> end_set(const SystemParams& sp, const TreeBudget& b) {
  std::vector<Point> all;
  const auto m = static_cast<std::size_t>(std::floor(1.0 / b.eps));
  const double dth = 1.0 / static_cast<double>(m);
  if (b.base_only) {
    for (std::size_t i = 0; i < m; ++i) all.push_back({(static_cast<double>(i) + 0.5) * dth, 0.0});
  } else {
    for (double t = sp.trap_lo + 0.5 * b.eps; t <= sp.trap_hi; t += b.eps) {
      for (std::size_t i = 0; i < m; ++i) all.push_back({(static_cast<double>(i) + 0.5) * dth, t});
    }
  }
  if (all.size() <= b.end_points) return all;
  std::vector<Point> E;
  const double stride = static_cast<double>(all.size()) / static_cast<double>(b.end_points);
  for (std::size_t k = 0; k < b.end_points; ++k) E.push_back(all[static_cast<std::size_t>(k * stride)]);
  return E;
}

}  // namespace detail

// Pressure from a fold-merged preimage tree.  Preimage paths of an
// eps-separated end set are (n, eps)-separated: distinct base digits differ
// by >= stride/d, fiber branches are kept apart only when 2|t| >= eps.  Base
// digits are sampled uniformly, fiber branches are enumerated exactly.
inline PressureEstimate pressure_estimate(const SystemParams& sp, const Potential& phi, const PathFilter& filter,
                                          const TreeBudget& b) {
  require(b.eps > 0.0 && b.n_lo >= 1 && b.n_hi > b.n_lo, "pressure_estimate: bad budget");
  if (sp.perturbed() && !b.base_only) throw ContractError("pressure_estimate: tree estimator needs skew mode");
  PressureEstimate est;
  est.eps = b.eps;
  est.method = b.base_only ? "preimage_tree_base" : "preimage_tree";
  const int stride = std::max(1, static_cast<int>(std::ceil(b.eps * sp.d - 1e-12)));
  const int D = sp.d / stride;
  const auto E = detail::end_set(sp, b);
  std::vector<double> xs, ys;
  for (int n = b.n_lo; n <= b.n_hi; ++n) {
    LogSumExp total, count;
    for (std::size_t e = 0; e < E.size(); ++e) {
      Rng g = make_rng(b.seed, "tree_digits", static_cast<std::uint64_t>(n) * 1000003u + e);
      LogSumExp we, ce;
      for (std::size_t s = 0; s < b.digit_samples; ++s) {
        std::vector<int> digits(std::max(0, n - 1));
        for (auto& dg : digits) dg = stride * static_cast<int>(uniform_index(g, D));
        detail::TreeWalker w(sp, phi, filter, b.eps, n, digits, b.base_only);
        w.walk(E[e], 0, 0.0, 0.0, 0.0);
        we.merge(w.weight_);
        ce.merge(w.count_);
        ++est.sample_size;
      }
      const double scale = (n - 1) * std::log(static_cast<double>(D)) - std::log(static_cast<double>(b.digit_samples));
      if (!we.empty()) total.add(we.value() + scale);
      if (!ce.empty()) count.add(ce.value() + scale);
    }
    PressureRow row{n, total.value(), count.value()};
    est.rows.push_back(row);
    if (total.empty()) {
      ++est.dropped;
      continue;
    }
    xs.push_back(n);
    ys.push_back(row.log_sum);
  }
  if (xs.empty()) {
    est.empty = true;
    est.value = -kInf;
    return est;
  }
  if (xs.size() < 4) throw NumericError("pressure_estimate: fewer than 4 non-empty n values");
  const auto fit = linear_fit(xs, ys);
  est.value = fit.slope;
  est.residual = fit.rms_residual;
  return est;
}

// Explicit-cloud variant: Lebesgue and preimage-enriched starting points,
// filtered, then the best separated subset per n.  Saturates once the
// cloud is smaller than the separated sets it should contain.
inline PressureEstimate pressure_estimate_cloud(const SystemParams& sp, const Potential& phi,
                                                const PathFilter& filter, double eps, int n_lo, int n_hi,
                                                std::size_t cloud_size, std::uint64_t seed) {
  PressureEstimate est;
  est.eps = eps;
  est.method = "cloud";
  std::vector<double> xs, ys;
  for (int n = n_lo; n <= n_hi; ++n) {
    Rng g = make_rng(seed, "cloud", static_cast<std::uint64_t>(n));
    SegmentCloud c;
    c.n = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < cloud_size; ++i) {
      TrackedPoint x = srb_sample(sp, g, 3);
      if (i % 2 == 1) {
        // preimage enrichment: a random depth-(n-1) backward path
        for (int k = 0; k + 1 < n; ++k) {
          auto y = pullback(sp, x, static_cast<int>(uniform_index(g, sp.d)), uniform01(g) < 0.5 ? 1 : -1);
          if (!y || !in_interval(sp, y->t)) break;
          x = *y;
        }
      }
      const auto seg = make_segment(sp, x, c.n);
      const bool keep = filter.collection == Collection::all ||
                        (filter.collection == Collection::good ? in_G(seg.psi, c.n, filter.r)
                                                               : in_S(seg.psi, c.n, filter.r));
      if (!keep) continue;
      if (filter.observable) {
        double s = 0.0;
        for (const auto& p : seg.points) s += filter.observable(p);
        if (s / n < filter.obs_lo || s / n > filter.obs_hi) continue;
      }
      c.weights.push_back(birkhoff_sum(phi, seg.points));
      c.orbits.push_back(seg.points);
    }
    const auto ps = partition_sum(c, eps);
    est.sample_size += c.orbits.size();
    est.rows.push_back({n, ps.log_value, ps.chosen.empty() ? -kInf : std::log(static_cast<double>(ps.chosen.size()))});
    if (ps.chosen.empty()) {
      ++est.dropped;
      continue;
    }
    xs.push_back(n);
    ys.push_back(ps.log_value);
  }
  if (xs.empty()) {
    est.empty = true;
    est.value = -kInf;
    return est;
  }
  if (xs.size() < 4) throw NumericError("pressure_estimate_cloud: fewer than 4 non-empty n values");
  const auto fit = linear_fit(xs, ys);
  est.value = fit.slope;
  est.residual = fit.rms_residual;
  return est;
}

struct PressureGap {
  double p_all = kNaN;
  double p_s = kNaN;
  double gap = kNaN;
  double residual_all = kNaN;
  double residual_s = kNaN;
  bool s_empty = false;
  PressureEstimate all, bad;
};

inline PressureGap pressure_gap_S(const SystemParams& sp, const Potential& phi, double r, const TreeBudget& b,
                                  std::function<double(const Point&)> center = {}) {
  if (std::isfinite(sp.constants.c0_estimate)) {
    require(r > 0.0 && r <= 0.5 * sp.constants.c0_estimate + 1e-15, "pressure_gap_S: need 0 < r <= c0/2");
  }
  PressureGap out;
  PathFilter fa;
  fa.center = center;
  PathFilter fs;
  fs.collection = Collection::bad;
  fs.r = r;
  fs.center = center;
  out.all = pressure_estimate(sp, phi, fa, b);
  out.bad = pressure_estimate(sp, phi, fs, b);
  out.p_all = out.all.value;
  out.p_s = out.bad.value;
  out.residual_all = out.all.residual;
  out.residual_s = out.bad.residual;
  out.s_empty = out.bad.empty;
  out.gap = out.s_empty ? kInf : out.p_all - out.p_s;
  return out;
}

struct MeasurePressure {
  double entropy = kNaN;
  double integral = kNaN;  // int phi d nu
  double value = kNaN;     // entropy + integral
  bool lower_bound = false;
};

// Candidate measure given by a long orbit (or a repeated periodic orbit).
// Entropy by Bowen-ball recurrence: h = -(1/(n-1)) log(C_n / C_1), where C_k
// counts orbit windows within eps of reference windows for k steps.
inline MeasurePressure measure_pressure_proxy(const std::vector<Point>& orbit, const Potential& phi, double eps,
                                              std::size_t n, std::size_t refs, std::uint64_t seed) {
  require(n >= 2 && orbit.size() > n, "measure_pressure_proxy: orbit too short");
  MeasurePressure m;
  double s = 0.0;
  for (const auto& p : orbit) s += phi(p);
  m.integral = s / static_cast<double>(orbit.size());
  const std::size_t L = orbit.size() - n + 1;
  Rng g = make_rng(seed, "brin_katok");
  double c1 = 0.0, cn = 0.0;
  for (std::size_t r = 0; r < refs; ++r) {
    const std::size_t i = uniform_index(g, L);
    for (std::size_t j = 0; j < L; ++j) {
      if (j == i || dist(orbit[i], orbit[j]) >= eps) continue;
      c1 += 1.0;
      std::size_t k = 1;
      while (k < n && dist(orbit[i + k], orbit[j + k]) < eps) ++k;
      if (k == n) cn += 1.0;
    }
  }
  if (c1 == 0.0) {
    m.entropy = 0.0;
    m.lower_bound = true;
  } else {
    if (cn == 0.0) {
      cn = 1.0;
      m.lower_bound = true;
    }
    m.entropy = std::max(0.0, -std::log(cn / c1) / static_cast<double>(n - 1));
  }
  m.value = m.entropy + m.integral;
  return m;
}

}  // namespace viana
