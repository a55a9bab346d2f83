#pragma once

// Covering numbers of the open unit l1 ball by Euclidean eps-balls: the
// three-regime analytic bound, the explicit lattice construction Z^n/m
// intersected with the ball, Monte-Carlo verification of the covering radius,
// and the entropy integral the certified radii rest on.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nngpcert/rng.hpp"

namespace nngpcert {

// 1 for eps >= 1; (2n)^(1/eps^2) for 1/sqrt(n) < eps < 1; (1+2/eps)^n below.
double covering_bound(int n, double eps);

struct LatticeCover {
  int n = 0;
  int m = 0;
  std::vector<Eigen::VectorXd> centers;  // coordinates in Z/m, all ||c||_1 < 1
  double radius_bound = 0.0;             // sqrt(1/m)
};

// Closed form |L_m| = sum_k 2^k C(n,k) C(m-1,k).
unsigned long long lattice_cardinality(int n, int m);

// Exact enumeration; requires 2 <= m <= n and n <= 12 (enumeration budget).
LatticeCover lattice_cover(int n, int m);

class CoverCounterexample : public std::runtime_error {
 public:
  CoverCounterexample(Eigen::VectorXd point, double sq_dist);
  const Eigen::VectorXd& point() const { return point_; }
  double sq_dist() const { return sq_dist_; }

 private:
  Eigen::VectorXd point_;
  double sq_dist_;
};

// Draws uniform points in the open unit l1 ball and checks that every sample
// lies within squared distance 1/m of some center. Returns the maximum
// nearest-center squared distance observed; throws CoverCounterexample if a
// sample violates the bound.
double verify_cover(const LatticeCover& cover, std::size_t samples, uint64_t seed);

// Uniform sample from the open unit l1 ball (simplex construction via
// exponentials, plus random signs).
Eigen::VectorXd sample_l1_ball(int n, RngStream& rng);

// Deterministic quadrature of int_0^1 sqrt(ln covering_bound(n, eps)) d eps
// (the integrand vanishes for eps >= 1). Reproducible to well below 1e-6.
double dudley_integral(int n);

}  // namespace nngpcert
