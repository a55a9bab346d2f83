#pragma once

// Exact infinite-width covariance propagation through a layer sequence, the
// induced RKHS distance, and the smoothness constants (C, M) of the output
// kernel. All functions are pure; kernel_matrix evaluates pairs concurrently
// with entries independent of evaluation order.

#include <Eigen/Dense>
#include <vector>

#include "nngpcert/arch.hpp"

namespace nngpcert {

// Tolerated rounding excursion of correlation arguments beyond [-1, 1];
// anything larger is treated as numerical corruption.
inline constexpr double kCorrelationTol = 1e-12;

// ReLU Gaussian-moment factor: Psi(t) = (sqrt(1-t^2) + (pi - arccos t) t) / pi.
// Inputs within `tol` of [-1, 1] are clamped; beyond that is a domain error.
double psi(double t, double tol = kCorrelationTol);

// Pixel-pair covariance of one layer's output for an ordered input pair
// (x, y): xx[a,b] = K_{a,b}(x,x), xy[a,b] = K_{a,b}(x,y), yy[a,b] = K_{a,b}(y,y).
struct KernelField {
  int layer = 0;  // index into arch.layers of the producing layer
  Eigen::MatrixXd xx, xy, yy;
};

// Inputs are (channels x pixels) matrices; flat vectors use index c*|I| + pixel.
Eigen::MatrixXd as_image(const ArchSpec& arch, const Eigen::VectorXd& x);

// Covariance of the first layer's output.
KernelField input_field(const ArchSpec& arch, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Covariance of layers[next]'s output given the previous field; `earlier`
// holds the fields of all layers before `field.layer` (needed by skips).
KernelField propagate_layer(const ArchSpec& arch, const KernelField& field, int next,
                            const std::vector<KernelField>& earlier);

// Full field sequence for an input pair, one entry per layer.
std::vector<KernelField> propagate_all(const ArchSpec& arch, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y);

struct PairKernel {
  double kxx, kxy, kyy;
};

// Scalar output kernel entries for one pair.
PairKernel output_kernel(const ArchSpec& arch, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Gram matrix of the scalar output kernel over a point set.
Eigen::MatrixXd kernel_matrix(const ArchSpec& arch, const std::vector<Eigen::VectorXd>& points);

// d(x,y) = sqrt(K(x,x) - 2 K(x,y) + K(y,y)); radicands negative within
// tolerance clamp to zero, beyond tolerance raise.
double rkhs_distance(double kxx, double kxy, double kyy);

struct SmoothnessConstants {
  double C = 0.0;  // sqrt(K(x,x)) >= C ||x||_2
  double M = 0.0;  // d(x,y) <= M C ||x-y||_2;  M = sqrt(|I^(0)| / |I^(Lf)|)
  std::vector<double> C_layer;  // per-layer trace of the recursion
  std::vector<double> M_layer;
};

SmoothnessConstants smoothness_constants(const ArchSpec& arch);

// Per-layer traces K^{(l)}(x,x), K^{(l)}(x,y), K^{(l)}(y,y) =
// sum_a K_{a,a}; used by the layerwise bound checks.
struct LayerTrace {
  int layer;
  double kxx, kxy, kyy;
};
std::vector<LayerTrace> layer_traces(const ArchSpec& arch, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y);

}  // namespace nngpcert
