#pragma once

// Closed-form probabilistic robustness guarantees for centered Gaussian
// classifiers sign(phi): certified l1-ball and segment radii at failure
// probability delta, their l^p transfer, and the inverse bounds (failure
// probability at a given radius). Stateless pure functions.

#include <cmath>

namespace nngpcert {

// a_n = (3/4) sqrt(ln 4n) + (ln n / 2) sqrt(ln 2n), n >= 2.
double dudley_constant(int n);

struct RobustnessCertificate {
  int n = 0;               // input dimension
  double delta = 0.0;      // failure probability bound
  double M = 0.0;          // Lipschitz ratio of the kernel feature map
  double norm2_x0 = 0.0;   // ||x_0||_2
  double a_n = 0.0;
  double r_l1 = 0.0;       // certified l1-ball radius
  double r_segment = 0.0;  // certified segment length
  bool tight_ball = false; // ball radius from the proof's tight denominator
  bool degenerate = false; // ||x_0||_2 == 0: all radii are 0

  // r_lp(p) = r_l1 / n^{(p-1)/p}; p = infinity gives r_l1 / n.
  double r_lp(double p) const;
};

// norm2_x0 >= 0, delta in (0,1), M > 0, n >= 2. With tight_ball the ball
// radius uses the denominator (16/sqrt(pi)) a_n + 1 + delta from the proof
// instead of the stated theorem's constant-2 form (the default).
RobustnessCertificate certify(double norm2_x0, double delta, double M, int n,
                              bool tight_ball = false);

enum class CertRegion { kBall, kSegment };

// Upper bound on P(classification boundary intersects the region of size r).
// Saturates at 1 in vacuous regimes; always in [0, 1].
double failure_prob(double r, double norm2_x0, double M, int n, CertRegion region);

}  // namespace nngpcert
