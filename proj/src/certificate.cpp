#include "nngpcert/certificate.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace nngpcert {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kSqrtPi = 1.772453850905516027298167483341145183;
}  // namespace

double dudley_constant(int n) {
  if (n < 2) throw std::invalid_argument("dudley_constant requires n >= 2");
  const double nd = static_cast<double>(n);
  return 0.75 * std::sqrt(std::log(4.0 * nd)) +
         0.5 * std::log(nd) * std::sqrt(std::log(2.0 * nd));
}

double RobustnessCertificate::r_lp(double p) const {
  if (p < 1.0) throw std::invalid_argument("r_lp requires p >= 1");
  if (std::isinf(p)) return r_l1 / n;
  return r_l1 / std::pow(static_cast<double>(n), (p - 1.0) / p);
}

RobustnessCertificate certify(double norm2_x0, double delta, double M, int n, bool tight_ball) {
  if (!(norm2_x0 >= 0.0)) throw std::invalid_argument("certify requires ||x0||_2 >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("certify requires delta in (0,1)");
  if (!(M > 0.0)) throw std::invalid_argument("certify requires M > 0");
  if (n < 2) throw std::invalid_argument("certify requires n >= 2");

  RobustnessCertificate cert;
  cert.n = n;
  cert.delta = delta;
  cert.M = M;
  cert.norm2_x0 = norm2_x0;
  cert.a_n = dudley_constant(n);
  cert.tight_ball = tight_ball;
  cert.degenerate = (norm2_x0 == 0.0);

  const double nd = static_cast<double>(n);
  const double ball_denom =
      tight_ball ? M * ((16.0 / kSqrtPi) * cert.a_n + 1.0 + delta)
                 : M * (12.0 * std::sqrt(std::log(4.0 * nd)) +
                        8.0 * std::log(nd) * std::sqrt(std::log(2.0 * nd)) + 2.0 * kSqrtPi) /
                       kSqrtPi;
  cert.r_l1 = norm2_x0 * delta / ball_denom;
  cert.r_segment = kPi * norm2_x0 * delta / (2.0 * M + kPi);
  return cert;
}

double failure_prob(double r, double norm2_x0, double M, int n, CertRegion region) {
  if (!(r > 0.0)) throw std::invalid_argument("failure_prob requires r > 0");
  if (!(norm2_x0 >= 0.0) || !(M > 0.0)) throw std::invalid_argument("failure_prob arguments");
  if (region == CertRegion::kSegment) {
    if (r >= norm2_x0) return 1.0;
    return std::min(1.0, 2.0 * M * r / (kPi * (norm2_x0 - r)));
  }
  if (n < 2) throw std::invalid_argument("failure_prob ball region requires n >= 2");
  const double ratio = norm2_x0 / (M * r);
  if (ratio <= 1.0) return 1.0;
  const double a_n = dudley_constant(n);
  return std::min(1.0, ((16.0 / kSqrtPi) * a_n + 1.0) / (ratio - 1.0));
}

}  // namespace nngpcert
