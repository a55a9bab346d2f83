#pragma once

// Finite-width random networks over the same architecture family:
// Gaussian initialization, exact forward pass and reverse-mode gradient,
// empirical-kernel estimation over network draws, and minimal-perturbation
// boundary search in the l1 / l2 / l-infinity norms inside the unit box.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "nngpcert/arch.hpp"

namespace nngpcert {

struct RandomNetwork {
  ArchSpec arch;
  std::vector<int> widths;    // channel count per parameterized layer
  std::vector<int> channels;  // derived output channel count per layer
  struct LayerParams {
    Eigen::MatrixXd W;  // empty for skip / pool / output
    Eigen::VectorXd b;
  };
  std::vector<LayerParams> params;  // one entry per layer
  uint64_t seed = 0;
};

// Number of parameterized layers (input conv + nonlinear layers + flatten).
int parameterized_layer_count(const ArchSpec& arch);

// Weights ~ N(0, sigma_w^2 / fan_in), biases ~ N(0, sigma_b^2); deterministic
// in (seed, stream_base). Skip layers require equal widths at their two ends.
RandomNetwork init_random(const ArchSpec& arch, const std::vector<int>& widths, uint64_t seed,
                          uint64_t stream_base = 0);

struct ForwardTrace {
  double phi = 0.0;
  // phi^{(l)} per layer (channels x pixels; the flatten output as a column).
  std::vector<Eigen::MatrixXd> preactivations;
};

ForwardTrace forward(const RandomNetwork& net, const Eigen::VectorXd& x);

// d phi / dx, reverse mode; ReLU subgradient at exactly 0 is 0.
Eigen::VectorXd gradient(const RandomNetwork& net, const Eigen::VectorXd& x);

// Both at once (one forward, one backward).
std::pair<double, Eigen::VectorXd> value_and_gradient(const RandomNetwork& net,
                                                      const Eigen::VectorXd& x);

// Empirical output covariance mean(phi(x_i) phi(x_j)) over independent
// network draws; deterministic in (seed) regardless of thread schedule.
Eigen::MatrixXd empirical_kernel(const ArchSpec& arch, const std::vector<int>& widths,
                                 const std::vector<Eigen::VectorXd>& points, int draws,
                                 uint64_t seed);

struct AttackRecord {
  double p = 2.0;  // attacked norm (1, 2, or INFINITY)
  Eigen::VectorXd x0, x_star;
  double distance = 0.0;
  int iterations = 0;  // gradient evaluations spent
  bool converged = false;
  bool censored = false;  // no sign flip found inside the box within budget
};

// Minimal-perturbation search from x0 in [0,1]^n with phi(x0) != 0:
// norm-adapted first-order ascent on -sign(phi(x0)) phi under a radius
// constraint, an outer bisection on the radius, and a final bisection along
// the segment to the crossing within `tolerance` (distance units).
AttackRecord boundary_search(const RandomNetwork& net, const Eigen::VectorXd& x0, double p,
                             double tolerance, int max_grad_steps = 2000);

struct ScalingConfig {
  std::vector<int> dims;
  int nets_per_dim = 10;
  int points_per_net = 10;
  std::vector<double> norms{1.0, 2.0, std::numeric_limits<double>::infinity()};
  int hidden_layers = 3;
  int width = 256;
  double sigma_w = 1.4142135623730951;  // He-style
  double sigma_b = 0.0;
  double tolerance = 0.0;  // <= 0: auto, 1e-5 of the box diameter in the norm
  int max_grad_steps = 2000;
  uint64_t seed = 1;
};

struct ScalingRecord {
  int n = 0;
  double p = 2.0;
  double distance = 0.0;
  double rel_distance = 0.0;  // ||dx||_p / ||x0||_p
  double norm2_x0 = 0.0;
  bool censored = false;
};

struct ScalingCell {
  int n = 0;
  double p = 2.0;
  double median = 0.0, p45 = 0.0, p55 = 0.0;              // absolute distances
  double rel_median = 0.0, rel_p45 = 0.0, rel_p55 = 0.0;  // relative distances
  int censored = 0;
  int attacks = 0;
  bool empty = false;  // every attack censored; medians are meaningless
};

struct ScalingResult {
  ScalingConfig config;
  std::vector<ScalingCell> cells;      // dims x norms, dim-major
  std::vector<ScalingRecord> records;  // every attack, censored included
};

// Attacks nets_per_dim random networks at points_per_net uniform [0,1]^n
// inputs per dimension and norm; medians exclude censored records.
ScalingResult scaling_experiment(const ScalingConfig& config);

}  // namespace nngpcert
