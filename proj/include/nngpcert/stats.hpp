#pragma once

// Small statistics helpers for the experiment pipelines: log-log power-law
// fits and empirical quantile profiles.

#include <vector>

namespace nngpcert {

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;  // in log space
  double slope_stderr = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares on (ln x, ln y); requires >= 3 points, all positive.
LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

// Linear-interpolated sample quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct PercentileProfile {
  std::vector<double> percentiles;  // i / (N-1)
  std::vector<double> distances;   // sorted
  double fit_slope = 0.0;          // OLS of distance on percentile over [0, 0.25]
  double fit_intercept = 0.0;
  double fit_r2 = 0.0;
};

// Empirical quantile curve of the distances with a linear fit restricted to
// the lowest quarter of percentiles; requires >= 100 values.
PercentileProfile percentile_profile(std::vector<double> distances);

}  // namespace nngpcert
