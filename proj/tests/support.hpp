#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sdelab/schedule.hpp"

namespace sdelab::test {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double mean_se = 0.0;  // standard error of the mean
  double var_se = 0.0;   // large-sample standard error of the variance
};

inline Moments moments(std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return {mean, m2, std::sqrt(m2 / n), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Time at which alpha_bar equals `target`, by bisection.
inline double time_of_alpha_bar(const NoiseSchedule& schedule, double target) {
  double lo = 0.0, hi = schedule.horizon();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (schedule.alpha_bar(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Least-squares slope of log(err) against log(n).
inline double loglog_slope(const std::vector<double>& n, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto k = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(n[i]), y = std::log(err[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace sdelab::test
