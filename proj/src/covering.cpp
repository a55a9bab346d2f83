#include "nngpcert/covering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "nngpcert/parallel.hpp"

namespace nngpcert {

double covering_bound(int n, double eps) {
  if (n < 1) throw std::invalid_argument("covering_bound requires n >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("covering_bound requires eps > 0");
  if (eps >= 1.0) return 1.0;
  const double nd = static_cast<double>(n);
  if (eps > 1.0 / std::sqrt(nd)) return std::pow(2.0 * nd, 1.0 / (eps * eps));
  return std::pow(1.0 + 2.0 / eps, nd);
}

unsigned long long lattice_cardinality(int n, int m) {
  if (n < 1 || m < 2) throw std::invalid_argument("lattice_cardinality requires n >= 1, m >= 2");
  auto binom = [](int a, int b) -> unsigned long long {
    if (b < 0 || b > a) return 0;
    unsigned long long r = 1;
    for (int i = 1; i <= b; ++i) r = r * static_cast<unsigned long long>(a - b + i) / i;
    return r;
  };
  unsigned long long total = 0;
  for (int k = 0; k <= m - 1; ++k)
    total += (1ull << k) * binom(n, k) * binom(m - 1, k);
  return total;
}

LatticeCover lattice_cover(int n, int m) {
  if (m < 2 || m > n) throw std::invalid_argument("lattice_cover requires 2 <= m <= n");
  if (n > 12) throw std::invalid_argument("lattice_cover enumeration budget: n <= 12");

  LatticeCover cover;
  cover.n = n;
  cover.m = m;
  cover.radius_bound = std::sqrt(1.0 / m);

  // Enumerate integer points z with sum |z_i| <= m-1 (strict ||z/m||_1 < 1).
  std::vector<int> z(n, 0);
  std::function<void(int, int)> rec = [&](int dim, int budget) {
    if (dim == n) {
      Eigen::VectorXd c(n);
      for (int i = 0; i < n; ++i) c(i) = static_cast<double>(z[i]) / m;
      cover.centers.push_back(std::move(c));
      return;
    }
    for (int v = -budget; v <= budget; ++v) {
      z[dim] = v;
      rec(dim + 1, budget - std::abs(v));
    }
    z[dim] = 0;
  };
  rec(0, m - 1);
  return cover;
}

CoverCounterexample::CoverCounterexample(Eigen::VectorXd point, double sq_dist)
    : std::runtime_error("covering violated: sample at squared distance " +
                         std::to_string(sq_dist) + " > 1/m from every center"),
      point_(std::move(point)),
      sq_dist_(sq_dist) {}

Eigen::VectorXd sample_l1_ball(int n, RngStream& rng) {
  // (e_1..e_n)/(e_1+..+e_{n+1}) is uniform on {y >= 0, sum y < 1}.
  Eigen::VectorXd y(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    y(i) = rng.exponential();
    total += y(i);
  }
  total += rng.exponential();
  for (int i = 0; i < n; ++i) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    y(i) = sign * y(i) / total;
  }
  return y;
}

double verify_cover(const LatticeCover& cover, std::size_t samples, uint64_t seed) {
  const int n = cover.n;
  const std::size_t nc = cover.centers.size();
  Eigen::MatrixXd centers(nc, n);
  for (std::size_t i = 0; i < nc; ++i) centers.row(i) = cover.centers[i].transpose();
  const Eigen::VectorXd center_sq = centers.rowwise().squaredNorm();
  const double bound = 1.0 / cover.m;

  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<double> block_max(blocks, 0.0);
  std::vector<std::pair<Eigen::VectorXd, double>> violations(blocks);

  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t count = std::min(kBlock, samples - b * kBlock);
    Eigen::MatrixXd pts(count, n);
    RngStream rng(seed, b);
    for (std::size_t s = 0; s < count; ++s) pts.row(s) = sample_l1_ball(n, rng).transpose();
    // nearest squared distance via ||x||^2 - 2 x.c + ||c||^2
    Eigen::MatrixXd dots = pts * centers.transpose();           // count x nc
    Eigen::VectorXd pt_sq = pts.rowwise().squaredNorm();
    double worst = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < nc; ++c)
        best = std::min(best, pt_sq(s) - 2.0 * dots(s, c) + center_sq(c));
      best = std::max(0.0, best);
      if (best > worst) worst = best;
      if (best > bound && violations[b].second == 0.0)
        violations[b] = {pts.row(s).transpose(), best};
    }
    block_max[b] = worst;
  });

  double max_sq = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    if (violations[b].second > 0.0)
      throw CoverCounterexample(violations[b].first, violations[b].second);
    max_sq = std::max(max_sq, block_max[b]);
  }
  return max_sq;
}

namespace {

// Adaptive Simpson with absolute tolerance.
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double dudley_integral(int n) {
  if (n < 2) throw std::invalid_argument("dudley_integral requires n >= 2");
  const double nd = static_cast<double>(n);
  const double split = 1.0 / std::sqrt(nd);

  // (2n)^(1/eps^2) regime: integrand sqrt(ln 2n)/eps has a closed form.
  const double middle = std::sqrt(std::log(2.0 * nd)) * std::log(std::sqrt(nd));

  // (1+2/eps)^n regime on [1e-6, 1/sqrt(n)], adaptive to 1e-8 ...
  auto f = [nd](double e) { return std::sqrt(nd * std::log1p(2.0 / e)); };
  constexpr double kCut = 1e-6;
  const double small = integrate(f, kCut, split, 1e-8);
  // ... plus the (0, 1e-6] remainder. Integration by parts gives
  // int_0^c f = c f(c) + int_0^c n / (sqrt(L(e)) (e+2)) de with L = n ln(1+2/e),
  // and the last integrand is at most sqrt(n) / (2 sqrt(ln(1+2/c))) there.
  const double tail = kCut * f(kCut) + kCut * std::sqrt(nd) / (2.0 * std::sqrt(std::log1p(2.0 / kCut)));

  return small + tail + middle;
}

}  // namespace nngpcert
