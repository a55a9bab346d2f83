#include "nngpcert/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nngpcert {

namespace {

struct Ols {
  double slope, intercept, slope_stderr, r2;
};

Ols ols(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  Ols fit{};
  if (sxx == 0.0) {
    fit.slope = 0.0;
    fit.intercept = my;
    fit.slope_stderr = 0.0;
    fit.r2 = 1.0;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  fit.r2 = (ss_tot == 0.0) ? 1.0 : 1.0 - ss_res / ss_tot;
  fit.slope_stderr = (n > 2) ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
  return fit;
}

}  // namespace

LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (xs.size() < 3) throw std::invalid_argument("fit_loglog needs at least 3 points");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("fit_loglog needs positive values");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  const Ols fit = ols(lx, ly);
  return {fit.slope, fit.intercept, fit.slope_stderr, fit.r2};
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  q = std::clamp(q, 0.0, 1.0);
  const double h = (sorted.size() - 1) * q;
  const size_t i = static_cast<size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - i) * (sorted[i + 1] - sorted[i]);
}

PercentileProfile percentile_profile(std::vector<double> distances) {
  if (distances.size() < 100)
    throw std::invalid_argument("percentile_profile needs at least 100 records");
  std::sort(distances.begin(), distances.end());
  PercentileProfile prof;
  const size_t n = distances.size();
  prof.percentiles.resize(n);
  for (size_t i = 0; i < n; ++i) prof.percentiles[i] = static_cast<double>(i) / (n - 1);
  prof.distances = std::move(distances);

  std::vector<double> px, py;
  for (size_t i = 0; i < n && prof.percentiles[i] <= 0.25; ++i) {
    px.push_back(prof.percentiles[i]);
    py.push_back(prof.distances[i]);
  }
  const Ols fit = ols(px, py);
  prof.fit_slope = fit.slope;
  prof.fit_intercept = fit.intercept;
  prof.fit_r2 = fit.r2;
  return prof;
}

}  // namespace nngpcert
