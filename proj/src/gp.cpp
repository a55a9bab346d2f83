#include "nngpcert/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "nngpcert/certificate.hpp"
#include "nngpcert/covering.hpp"
#include "nngpcert/parallel.hpp"
#include "nngpcert/rng.hpp"

namespace nngpcert {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr uint64_t kCloudStream = 0x636c6f756400ull;  // offsets trial streams from cloud streams
}  // namespace

const ArchSpec& KernelSource::arch() const {
  if (!arch_) throw std::logic_error("linear kernel source has no architecture");
  return *arch_;
}

double KernelSource::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (is_linear()) return x.dot(y);
  return output_kernel(*arch_, x, y).kxy;
}

Eigen::MatrixXd KernelSource::gram(const std::vector<Eigen::VectorXd>& points) const {
  if (!is_linear()) return kernel_matrix(*arch_, points);
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) g(i, j) = g(j, i) = points[i].dot(points[j]);
  return g;
}

double KernelSource::lipschitz_ratio() const {
  return is_linear() ? 1.0 : smoothness_constants(*arch_).M;
}

NonPsdError::NonPsdError(double min_eig, double max_eig)
    : std::runtime_error("gram matrix is not positive semidefinite within the jitter cap "
                         "(eigenvalues in [" +
                         std::to_string(min_eig) + ", " + std::to_string(max_eig) + "])"),
      min_eig_(min_eig),
      max_eig_(max_eig) {}

GramEnsemble build_ensemble(Eigen::MatrixXd gram, std::vector<Eigen::VectorXd> points,
                            uint64_t seed) {
  const Eigen::Index m = gram.rows();
  GramEnsemble ens;
  ens.points = std::move(points);
  ens.gram = std::move(gram);
  ens.seed = seed;

  const double max_diag = m > 0 ? ens.gram.diagonal().maxCoeff() : 0.0;
  if (max_diag <= 0.0) {
    // all-zero covariance: every draw is identically zero
    if (ens.gram.cwiseAbs().maxCoeff() > 0.0)
      throw NonPsdError(ens.gram.diagonal().minCoeff(), max_diag);
    ens.factor = Eigen::MatrixXd::Zero(m, m);
    ens.jitter_used = 0.0;
    return ens;
  }

  const double gram_norm = ens.gram.norm();
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd shifted = ens.gram;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if ((L * L.transpose() - shifted).norm() <= kGramRelTol * std::max(gram_norm, 1e-300)) {
        ens.factor = std::move(L);
        ens.jitter_used = jitter;
        return ens;
      }
    }
    if (jitter >= kJitterCapRel * max_diag) break;
    jitter = (jitter == 0.0) ? 1e-12 * max_diag : jitter * 10.0;
    jitter = std::min(jitter, kJitterCapRel * max_diag);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(ens.gram, Eigen::EigenvaluesOnly);
  throw NonPsdError(eigs.eigenvalues().minCoeff(), eigs.eigenvalues().maxCoeff());
}

GramEnsemble build_ensemble(const ArchSpec& arch, std::vector<Eigen::VectorXd> points,
                            uint64_t seed) {
  Eigen::MatrixXd gram = kernel_matrix(arch, points);
  return build_ensemble(std::move(gram), std::move(points), seed);
}

GramEnsemble build_ensemble(const KernelSource& kernel, std::vector<Eigen::VectorXd> points,
                            uint64_t seed) {
  Eigen::MatrixXd gram = kernel.gram(points);
  return build_ensemble(std::move(gram), std::move(points), seed);
}

Eigen::MatrixXd sample(const GramEnsemble& ens, int trials, uint64_t seed) {
  const Eigen::Index m = ens.gram.rows();
  Eigen::MatrixXd out(trials, m);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    RngStream rng(seed, t);
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    out.row(t) = (ens.factor * z).transpose();
  });
  return out;
}

ConditionedEnsemble condition_on_anchor(const GramEnsemble& ens, int anchor, double phi0) {
  const Eigen::Index m = ens.gram.rows();
  if (anchor < 0 || anchor >= m) throw std::invalid_argument("anchor index out of range");
  const double k00 = ens.gram(anchor, anchor);
  if (!(k00 > 0.0)) throw std::invalid_argument("anchor has zero variance");
  ConditionedEnsemble c;
  c.anchor = anchor;
  c.phi0 = phi0;
  const Eigen::VectorXd k0 = ens.gram.col(anchor);
  c.mu = k0 * (phi0 / k00);
  c.khat = ens.gram - (k0 * k0.transpose()) / k00;
  return c;
}

// ---- region discretization ----

namespace {

// Inverse standard normal CDF (Acklam's rational approximation, |rel| ~ 1e-9).
double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425, phigh = 1 - 0.02425;
  if (p <= 0.0 || p >= 1.0) throw std::domain_error("inverse_normal_cdf domain");
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > phigh) {
    const double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

// Low-discrepancy sequence in [0,1)^d (Kronecker recurrence on the
// generalized golden ratio).
class RSequence {
 public:
  explicit RSequence(int d) : alpha_(d), state_(d, 0.5) {
    double phi = 1.5;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (d + 1));
    double a = 1.0;
    for (int j = 0; j < d; ++j) {
      a /= phi;
      alpha_[j] = a;
    }
  }
  void next(std::vector<double>& u) {
    for (size_t j = 0; j < alpha_.size(); ++j) {
      state_[j] += alpha_[j];
      if (state_[j] >= 1.0) state_[j] -= 1.0;
      u[j] = state_[j];
    }
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> state_;
};

double lp_norm(const Eigen::VectorXd& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

// Direction on the unit l^p sphere from a low-discrepancy point.
Eigen::VectorXd lp_direction(const std::vector<double>& u, int n, double p) {
  Eigen::VectorXd d(n);
  if (p == 1.0) {
    // folded exponential magnitudes with the fold sign
    for (int j = 0; j < n; ++j) {
      const double w = 2.0 * u[j] - 1.0;
      const double mag = -std::log1p(-std::min(std::abs(w), 1.0 - 1e-15));
      d(j) = (w < 0 ? -1.0 : 1.0) * mag;
    }
  } else if (std::isinf(p)) {
    for (int j = 0; j < n; ++j) d(j) = 2.0 * u[j] - 1.0;
  } else {
    for (int j = 0; j < n; ++j) {
      const double g = inverse_normal_cdf(std::min(1.0 - 1e-12, std::max(1e-12, u[j])));
      d(j) = (p == 2.0) ? g : std::copysign(std::pow(std::abs(g), 2.0 / p), g);
    }
  }
  const double norm = lp_norm(d, p);
  if (norm <= 0.0) {
    d.setZero();
    d(0) = 1.0;
    return d;
  }
  return d / norm;
}

}  // namespace

std::vector<Eigen::VectorXd> region_grid(const Eigen::VectorXd& x0, const Region& region,
                                         int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("region grid needs at least 2 points");
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(grid_size);
  pts.push_back(x0);

  if (const auto* seg = std::get_if<SegmentRegion>(&region)) {
    if (!(seg->r > 0.0)) throw std::invalid_argument("degenerate segment (r <= 0)");
    for (int i = 1; i < grid_size; ++i)
      pts.push_back(x0 + (seg->r * i / (grid_size - 1)) * seg->v);
    return pts;
  }

  const auto& ball = std::get<BallRegion>(region);
  if (!(ball.r > 0.0)) throw std::invalid_argument("degenerate ball (r <= 0)");
  const int n = static_cast<int>(x0.size());
  RSequence seq(n + 1);
  std::vector<double> u(n + 1);
  for (int i = 1; i < grid_size; ++i) {
    seq.next(u);
    Eigen::VectorXd dir = lp_direction(u, n, ball.p);
    // crossings cluster near the boundary: alternate sphere and interior points
    const double rho =
        (i % 2 == 0) ? ball.r : ball.r * std::pow(std::max(u[n], 1e-15), 1.0 / n);
    pts.push_back(x0 + rho * dir);
  }
  return pts;
}

CrossingEstimate crossing_probability(const KernelSource& kernel, const Eigen::VectorXd& x0,
                                      const Region& region, int grid_size, int trials,
                                      uint64_t seed) {
  std::vector<Eigen::VectorXd> grid = region_grid(x0, region, grid_size);
  GramEnsemble ens = build_ensemble(kernel, std::move(grid), seed);

  const Eigen::Index m = ens.gram.rows();
  constexpr int kBlock = 1024;
  const int blocks = (trials + kBlock - 1) / kBlock;
  std::vector<long> hits(blocks, 0);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const int lo = static_cast<int>(b) * kBlock;
    const int hi = std::min(trials, lo + kBlock);
    Eigen::VectorXd z(m), v(m);
    long count = 0;
    for (int t = lo; t < hi; ++t) {
      RngStream rng(seed, static_cast<uint64_t>(t));
      for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
      v.noalias() = ens.factor * z;
      const double v0 = v(0);
      for (Eigen::Index i = 1; i < m; ++i) {
        if (v0 * v(i) < 0.0) {
          ++count;
          break;
        }
      }
    }
    hits[b] = count;
  });

  long total = 0;
  for (long h : hits) total += h;
  CrossingEstimate est;
  est.grid_size = grid_size;
  est.trials = trials;
  est.jitter_used = ens.jitter_used;
  est.estimate = static_cast<double>(total) / trials;
  est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / trials);
  return est;
}

RiceReport rice_check(const KernelSource& kernel, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& v, double r, int grid_size, int trials,
                      uint64_t seed) {
  const double norm_x0 = x0.norm();
  if (!(r > 0.0) || r >= norm_x0)
    throw std::invalid_argument("rice_check requires 0 < r < ||x0||_2");

  // empirical zero (sign-change) count along the discretized segment
  SegmentRegion seg{v, r};
  std::vector<Eigen::VectorXd> grid = region_grid(x0, Region(seg), grid_size);
  GramEnsemble ens = build_ensemble(kernel, std::move(grid), seed);
  // grid points are ordered by parameter t: x0 first, then increasing t
  const Eigen::Index m = ens.gram.rows();

  constexpr int kBlock = 1024;
  const int blocks = (trials + kBlock - 1) / kBlock;
  std::vector<double> sum(blocks, 0.0), sumsq(blocks, 0.0);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const int lo = static_cast<int>(b) * kBlock;
    const int hi = std::min(trials, lo + kBlock);
    Eigen::VectorXd z(m), val(m);
    for (int t = lo; t < hi; ++t) {
      RngStream rng(seed, static_cast<uint64_t>(t));
      for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
      val.noalias() = ens.factor * z;
      int changes = 0;
      for (Eigen::Index i = 1; i < m; ++i)
        if (val(i - 1) * val(i) < 0.0) ++changes;
      sum[b] += changes;
      sumsq[b] += static_cast<double>(changes) * changes;
    }
  });
  double s1 = 0.0, s2 = 0.0;
  for (int b = 0; b < blocks; ++b) {
    s1 += sum[b];
    s2 += sumsq[b];
  }
  RiceReport rep;
  rep.empirical_mean = s1 / trials;
  const double var = std::max(0.0, s2 / trials - rep.empirical_mean * rep.empirical_mean);
  rep.stderr_ = std::sqrt(var / trials);

  // Rice bound: (1/pi) int_0^r sqrt(d2 Ktilde / ds dt |_{s=t}) dt with the
  // mixed partial from central differences of the normalized kernel,
  // Richardson-extrapolated once. Since Ktilde(u,u) = 1, the 2D central
  // stencil reduces to (1 - Ktilde(t+h, t-h)) / (2 h^2).
  auto variance_at = [&](double t) {
    const Eigen::VectorXd p = x0 + t * v;
    const double k = kernel.eval(p, p);
    if (!(k > 0.0)) throw std::runtime_error("zero variance on the segment; cannot normalize");
    return k;
  };
  auto ktilde = [&](double s, double t) {
    const Eigen::VectorXd ps = x0 + s * v, pt = x0 + t * v;
    return kernel.eval(ps, pt) / std::sqrt(variance_at(s) * variance_at(t));
  };
  const double h = r / (8.0 * grid_size);
  auto mixed_partial = [&](double t) {
    const double dh = (1.0 - ktilde(t + h, t - h)) / (2.0 * h * h);
    const double dh2 = (1.0 - ktilde(t + h / 2.0, t - h / 2.0)) / (h * h / 2.0);
    return (4.0 * dh2 - dh) / 3.0;
  };
  // composite Simpson on [0, r]
  const int nodes = 128;  // even
  double acc = 0.0;
  for (int i = 0; i <= nodes; ++i) {
    const double t = r * i / nodes;
    const double w = (i == 0 || i == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * std::sqrt(std::max(0.0, mixed_partial(t)));
  }
  rep.rice_bound = (r / nodes) / 3.0 * acc / kPi;

  const double M = kernel.lipschitz_ratio();
  rep.coarse_bound = 2.0 * M * r / (kPi * (norm_x0 - r));
  return rep;
}

TailReport borell_tis_check(const GramEnsemble& ens, const std::vector<double>& t_values,
                            int trials, uint64_t seed) {
  if (trials < 10000)
    throw std::invalid_argument("borell_tis_check needs trials >= 10000 (empirical E sup "
                                "stands in for the true one)");
  const Eigen::Index m = ens.gram.rows();
  TailReport rep;
  rep.sigma = std::sqrt(std::max(0.0, ens.gram.diagonal().maxCoeff()));

  std::vector<double> sups(trials);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    RngStream rng(seed, t);
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    sups[t] = (ens.factor * z).maxCoeff();
  });
  double esup = 0.0;
  for (double s : sups) esup += s;
  esup /= trials;
  rep.empirical_esup = esup;

  for (double t : t_values) {
    TailRow row;
    row.t = t;
    long count = 0;
    for (double s : sups)
      if (s >= esup + t) ++count;
    row.frequency = static_cast<double>(count) / trials;
    row.bound = (rep.sigma > 0.0 && t > 0.0)
                    ? std::exp(-t * t / (2.0 * rep.sigma * rep.sigma))
                    : 1.0;
    row.stderr_ = std::sqrt(row.frequency * (1.0 - row.frequency) / trials);
    row.pass = row.frequency <= row.bound + 3.0 * row.stderr_;
    rep.rows.push_back(row);
  }
  return rep;
}

DudleyReport dudley_check(int n, int cloud_size, int trials, uint64_t seed) {
  if (n < 1 || cloud_size < 1) throw std::invalid_argument("dudley_check arguments");
  DudleyReport rep;
  rep.n = n;
  rep.cloud_size = cloud_size;

  Eigen::MatrixXd cloud(cloud_size, n);
  for (int j = 0; j < cloud_size; ++j) {
    RngStream rng(seed, kCloudStream + static_cast<uint64_t>(j));
    cloud.row(j) = sample_l1_ball(n, rng).transpose();
  }

  constexpr int kBlock = 256;
  const int blocks = (trials + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const int lo = static_cast<int>(b) * kBlock;
    const int hi = std::min(trials, lo + kBlock);
    Eigen::MatrixXd w(hi - lo, n);
    for (int t = lo; t < hi; ++t) {
      RngStream rng(seed, static_cast<uint64_t>(t));
      for (int j = 0; j < n; ++j) w(t - lo, j) = rng.normal();
    }
    const Eigen::MatrixXd vals = w * cloud.transpose();  // (block) x cloud
    double acc = 0.0;
    for (Eigen::Index r = 0; r < vals.rows(); ++r) acc += vals.row(r).maxCoeff();
    partial[b] = acc;
  });
  double esup = 0.0;
  for (double p : partial) esup += p;
  rep.empirical_esup = esup / trials;

  const double a_n = (n >= 2) ? dudley_constant(n)
                              : 0.75 * std::sqrt(std::log(4.0));  // n = 1: ln n term vanishes
  rep.bound = 8.0 * std::sqrt(2.0) * a_n;

  // E ||w||_inf = int_0^inf (1 - (2 Phi(t) - 1)^n) dt
  auto integrand = [n](double t) {
    return 1.0 - std::pow(std::erf(t / std::sqrt(2.0)), n);
  };
  const double upper = 10.0 + std::sqrt(2.0 * std::log(std::max(2.0, static_cast<double>(n))));
  const int nodes = 2048;
  double acc = 0.0;
  for (int i = 0; i <= nodes; ++i) {
    const double t = upper * i / nodes;
    const double w = (i == 0 || i == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * integrand(t);
  }
  rep.comparator = (upper / nodes) / 3.0 * acc;
  return rep;
}

}  // namespace nngpcert
