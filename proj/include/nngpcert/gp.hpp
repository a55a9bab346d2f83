#pragma once

// Sampling laboratory for the Gaussian processes behind the certificates:
// gram-matrix ensembles with jitter-escalated Cholesky factors, anchor
// conditioning, Monte-Carlo boundary-crossing probabilities, Rice zero
// counts, and the Borell-TIS / Dudley concentration checks. Trials draw from
// per-(seed, trial) counter-based streams, so results are independent of
// scheduling.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "nngpcert/arch.hpp"
#include "nngpcert/kernel.hpp"

namespace nngpcert {

inline constexpr double kGramRelTol = 1e-8;      // factor residual acceptance
inline constexpr double kJitterCapRel = 1e-6;    // jitter cap, relative to max diagonal

// Kernel behind an ensemble: the architecture-induced output kernel, or the
// built-in linear kernel K(x,y) = x.y used as an analytic oracle.
class KernelSource {
 public:
  static KernelSource linear() { return KernelSource(); }
  static KernelSource nngp(const ArchSpec& arch) { return KernelSource(arch); }

  bool is_linear() const { return arch_ == nullptr; }
  const ArchSpec& arch() const;

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  Eigen::MatrixXd gram(const std::vector<Eigen::VectorXd>& points) const;

  // Lipschitz ratio M of the feature map (1 for the linear kernel).
  double lipschitz_ratio() const;

 private:
  KernelSource() = default;
  explicit KernelSource(const ArchSpec& arch) : arch_(&arch) {}
  const ArchSpec* arch_ = nullptr;
};

class NonPsdError : public std::runtime_error {
 public:
  NonPsdError(double min_eig, double max_eig);
  double min_eigenvalue() const { return min_eig_; }
  double max_eigenvalue() const { return max_eig_; }

 private:
  double min_eig_, max_eig_;
};

struct GramEnsemble {
  std::vector<Eigen::VectorXd> points;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd factor;  // lower triangular, factor factor^T ~ gram + jitter I
  double jitter_used = 0.0;
  uint64_t seed = 0;
};

// Factorizes gram + jitter I, escalating jitter from 0 by decade steps from
// 1e-12 * max diagonal up to kJitterCapRel * max diagonal; throws NonPsdError
// with eigenvalue diagnostics if the cap is exceeded.
GramEnsemble build_ensemble(Eigen::MatrixXd gram, std::vector<Eigen::VectorXd> points,
                            uint64_t seed);
GramEnsemble build_ensemble(const ArchSpec& arch, std::vector<Eigen::VectorXd> points,
                            uint64_t seed);
GramEnsemble build_ensemble(const KernelSource& kernel, std::vector<Eigen::VectorXd> points,
                            uint64_t seed);

// trials x points matrix of independent centered Gaussian draws with
// covariance gram; bitwise reproducible for a fixed seed.
Eigen::MatrixXd sample(const GramEnsemble& ens, int trials, uint64_t seed);

struct ConditionedEnsemble {
  int anchor = 0;
  double phi0 = 0.0;
  Eigen::VectorXd mu;     // conditional mean at every point
  Eigen::MatrixXd khat;   // conditional covariance
};

ConditionedEnsemble condition_on_anchor(const GramEnsemble& ens, int anchor, double phi0);

// ---- regions ----

struct BallRegion {
  double r = 0.0;
  double p = 2.0;  // l^p norm; use INFINITY for the sup norm
};

struct SegmentRegion {
  Eigen::VectorXd v;  // unit direction
  double r = 0.0;     // length
};

using Region = std::variant<BallRegion, SegmentRegion>;

// Finite discretization of a region around x0; point 0 is x0 itself. Grids
// are nested under grid_size refinement (a prefix of a fixed sequence).
std::vector<Eigen::VectorXd> region_grid(const Eigen::VectorXd& x0, const Region& region,
                                         int grid_size);

struct CrossingEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  int grid_size = 0;
  int trials = 0;
  double jitter_used = 0.0;
};

// Fraction of GP draws whose sign at some grid point differs from the sign at
// x0. Finite grids under-estimate the continuum event, the safe direction for
// checking an upper bound.
CrossingEstimate crossing_probability(const KernelSource& kernel, const Eigen::VectorXd& x0,
                                      const Region& region, int grid_size, int trials,
                                      uint64_t seed);

struct RiceReport {
  double empirical_mean = 0.0;  // mean sign-change count over draws
  double stderr_ = 0.0;
  double rice_bound = 0.0;      // quadrature of the normalized kernel's mixed partial
  double coarse_bound = 0.0;    // 2 M r / (pi (||x0||_2 - r))
};

// Zero counts of the normalized process along the segment x0 + t v, t in [0,r].
RiceReport rice_check(const KernelSource& kernel, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& v, double r, int grid_size, int trials,
                      uint64_t seed);

struct TailRow {
  double t = 0.0;
  double frequency = 0.0;  // empirical P(sup >= E_hat sup + t)
  double bound = 0.0;      // exp(-t^2 / (2 sigma^2))
  double stderr_ = 0.0;
  bool pass = false;
};

struct TailReport {
  double sigma = 0.0;           // sqrt(max diagonal of gram)
  double empirical_esup = 0.0;
  std::vector<TailRow> rows;
};

// Borell-TIS exceedance frequencies at the given t values; requires
// trials >= 10000 (the empirical E sup stands in for the true one).
TailReport borell_tis_check(const GramEnsemble& ens, const std::vector<double>& t_values,
                            int trials, uint64_t seed);

struct DudleyReport {
  double empirical_esup = 0.0;  // E sup over the cloud of w . x
  double bound = 0.0;           // 8 sqrt(2) a_n
  double comparator = 0.0;      // E ||w||_inf by quadrature
  int n = 0;
  int cloud_size = 0;
};

// Expected supremum of the linear GP over a cloud sampled in the unit l1 ball.
DudleyReport dudley_check(int n, int cloud_size, int trials, uint64_t seed);

}  // namespace nngpcert
