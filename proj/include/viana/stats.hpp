#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "viana/errors.hpp"

namespace viana {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double mean(std::span<const double> v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Linear-interpolation percentile, q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
  require(!v.empty(), "percentile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

struct LinearFit {
  double slope = kNaN;
  double intercept = kNaN;
  double rms_residual = kNaN;
  std::size_t points = 0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "linear_fit: size mismatch");
  LinearFit f;
  f.points = x.size();
  if (x.size() < 2) return f;
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / static_cast<double>(x.size()));
  return f;
}

// Streaming log(sum exp(v_i)).
class LogSumExp {
 public:
  void add(double v) {
    if (v == -kInf) return;
    if (v > max_) {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    } else {
      sum_ += std::exp(v - max_);
    }
  }
  void merge(const LogSumExp& o) {
    if (o.max_ == -kInf) return;
    if (o.max_ > max_) {
      sum_ = sum_ * std::exp(max_ - o.max_) + o.sum_;
      max_ = o.max_;
    } else {
      sum_ += o.sum_ * std::exp(o.max_ - max_);
    }
  }
  double value() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }
  bool empty() const { return max_ == -kInf; }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
};

inline double log_sum_exp(std::span<const double> v) {
  LogSumExp acc;
  for (double x : v) acc.add(x);
  return acc.value();
}

// Birkhoff-average uncertainty: half-sample drift and batch-means standard error.
struct MeanWithError {
  double value = kNaN;
  double half_drift = kNaN;
  double batch_stderr = kNaN;
  double error_bar = kNaN;
  std::size_t samples = 0;
};

inline MeanWithError mean_with_error(std::span<const double> terms, std::size_t batches = 20) {
  MeanWithError r;
  r.samples = terms.size();
  if (terms.empty()) return r;
  r.value = mean(terms);
  const std::size_t half = terms.size() / 2;
  r.half_drift = half > 0 ? std::abs(mean(terms.first(half)) - r.value) : 0.0;
  batches = std::max<std::size_t>(2, std::min(batches, terms.size()));
  const std::size_t len = terms.size() / batches;
  std::vector<double> bm;
  for (std::size_t b = 0; b < batches && len > 0; ++b) bm.push_back(mean(terms.subspan(b * len, len)));
  r.batch_stderr = bm.size() > 1 ? stddev(bm) / std::sqrt(static_cast<double>(bm.size())) : 0.0;
  r.error_bar = std::max(r.half_drift, 2.0 * r.batch_stderr);
  return r;
}

}  // namespace viana
