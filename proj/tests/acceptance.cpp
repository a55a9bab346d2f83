// Acceptance suite: runs every headline check at full scale and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngpcert/arch.hpp"
#include "nngpcert/certificate.hpp"
#include "nngpcert/covering.hpp"
#include "nngpcert/gp.hpp"
#include "nngpcert/kernel.hpp"
#include "nngpcert/randnet.hpp"
#include "nngpcert/rng.hpp"
#include "nngpcert/stats.hpp"

using namespace nngpcert;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& out, bool ok, const std::string& what) {
  if (!ok) {
    out.pass = false;
    out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
}

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

Eigen::VectorXd uniform_vec(int n, RngStream& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform();
  return v;
}

struct TestArch {
  std::string name;
  ArchSpec arch;
};

std::vector<TestArch> test_arches() {
  return {{"fc", fc_arch(16, 3, 1.2, 0.1)},
          {"conv-pool", conv_arch(3, 4, true, 1.0, 0.1)},
          {"conv-skip", skip_arch(3, 4, 1.1, 0.05)}};
}

// ---- criterion 1: scaling reproduction ----

Outcome criterion_scaling() {
  Outcome out;
  ScalingConfig cfg;
  cfg.dims = {64, 256, 1024, 4096};
  cfg.nets_per_dim = 10;
  cfg.points_per_net = 20;  // 200 attacks per (n, norm)
  cfg.width = 256;
  cfg.hidden_layers = 3;
  cfg.seed = 20240817;
  ScalingResult res = scaling_experiment(cfg);

  const double tol = 0.15;
  std::string slopes;
  for (double p : cfg.norms) {
    std::vector<double> xs, ys, rel;
    for (const auto& c : res.cells) {
      if (c.p != p || c.empty) continue;
      xs.push_back(c.n);
      ys.push_back(c.median);
      rel.push_back(c.rel_median);
    }
    note(out, xs.size() == cfg.dims.size(), "missing cells at p=" + num(p));
    if (xs.size() < 3) continue;
    const double target = (p == 1.0) ? 0.5 : (std::isinf(p) ? -0.5 : 0.0);
    LogLogFit fit = fit_loglog(xs, ys);
    LogLogFit rfit = fit_loglog(xs, rel);
    slopes += " p=" + (std::isinf(p) ? std::string("inf") : num(p)) + ": " + num(fit.slope, 3) +
              "/" + num(rfit.slope, 3);
    note(out, std::abs(fit.slope - target) <= tol,
         "slope p=" + num(p) + " is " + num(fit.slope) + ", target " + num(target));
    note(out, std::abs(rfit.slope + 0.5) <= tol,
         "relative slope p=" + num(p) + " is " + num(rfit.slope));
  }
  long censored = 0;
  for (const auto& c : res.cells) censored += c.censored;
  out.detail = "slopes(abs/rel):" + slopes + "; censored=" + std::to_string(censored) +
               (out.detail.empty() ? "" : "; " + out.detail);

  // distance-by-percentile profile of the n=1024 l1 records tracks the
  // expected linear law over the lowest quartile
  std::vector<double> l1_1024;
  for (const auto& r : res.records)
    if (r.n == 1024 && r.p == 1.0 && !r.censored) l1_1024.push_back(r.distance);
  if (l1_1024.size() >= 100) {
    PercentileProfile prof = percentile_profile(std::move(l1_1024));
    note(out, prof.fit_r2 >= 0.95, "percentile-profile R2 " + num(prof.fit_r2));
    out.detail += "; profile_r2=" + num(prof.fit_r2, 3);
  } else {
    note(out, false, "too few n=1024 l1 records for the profile");
  }
  return out;
}

// ---- criterion 2: certificate soundness ----

Outcome criterion_certificates() {
  Outcome out;
  double worst_margin = -kInf;
  for (const auto& [name, arch] : test_arches()) {
    const SmoothnessConstants sc = smoothness_constants(arch);
    const int n = arch.input_dim();
    RngStream rng(404, 0);
    Eigen::VectorXd x0 = uniform_vec(n, rng);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    v.normalize();
    KernelSource src = KernelSource::nngp(arch);
    for (double delta : {0.1, 0.3, 0.5}) {
      RobustnessCertificate cert = certify(x0.norm(), delta, sc.M, n);
      CrossingEstimate ball =
          crossing_probability(src, x0, BallRegion{cert.r_l1, 1.0}, 512, 10000, 505);
      note(out, ball.estimate <= delta + 2.0 * ball.stderr_,
           name + " ball delta=" + num(delta) + " est=" + num(ball.estimate));
      CrossingEstimate seg =
          crossing_probability(src, x0, SegmentRegion{v, cert.r_segment}, 512, 10000, 607);
      note(out, seg.estimate <= delta + 2.0 * seg.stderr_,
           name + " segment delta=" + num(delta) + " est=" + num(seg.estimate));
      worst_margin = std::max(worst_margin,
                              std::max(ball.estimate - delta, seg.estimate - delta));
    }
  }
  out.detail = "18 configs (3 arch x 3 delta x {ball,segment}); worst est-delta = " +
               num(worst_margin) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 3: analytic crossing oracle ----

Outcome criterion_crossing_oracle() {
  Outcome out;
  const int n = 8;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  x0(0) = 10.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(1) = 1.0;
  const double target = std::atan(0.1) / 3.141592653589793238462643383279502884;
  CrossingEstimate est = crossing_probability(KernelSource::linear(), x0,
                                              SegmentRegion{v, 1.0}, 513, 100000, 909);
  note(out, std::abs(est.estimate - target) <= 3.0 * est.stderr_,
       "estimate " + num(est.estimate, 6) + " vs target " + num(target, 6) + " (3se = " +
           num(3.0 * est.stderr_, 3) + ")");
  out.detail = "estimate=" + num(est.estimate, 5) + " target=" + num(target, 5) +
               " stderr=" + num(est.stderr_, 3) +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 4: master-theorem convergence ----

Outcome criterion_master_theorem() {
  Outcome out;
  ArchSpec arch = fc_arch(16, 3, 1.2, 0.1);
  RngStream rng(1212, 0);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(uniform_vec(16, rng));
  const Eigen::MatrixXd exact = kernel_matrix(arch, pts);

  std::string ladder;
  double prev = kInf;
  bool decreasing = true;
  double last = kInf;
  for (int w : {64, 256, 1024}) {
    const Eigen::MatrixXd emp = empirical_kernel(arch, {w, w, w, 1}, pts, 4000, 1212);
    const double rel = (emp - exact).norm() / exact.norm();
    ladder += " " + num(rel, 3);
    decreasing = decreasing && rel < prev;
    prev = rel;
    last = rel;
  }
  note(out, decreasing, "errors not strictly decreasing:" + ladder);
  note(out, last <= 0.1, "final error " + num(last));
  out.detail = "rel errors at widths {64,256,1024}:" + ladder +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 5: covering exactness ----

Outcome criterion_covering() {
  Outcome out;
  int combos = 0;
  double worst_gap = kInf;
  for (int n = 2; n <= 8; ++n) {
    for (int m = 2; m <= std::min(n, 5); ++m) {
      ++combos;
      LatticeCover cover = lattice_cover(n, m);
      note(out, cover.centers.size() == lattice_cardinality(n, m),
           "cardinality mismatch at n=" + std::to_string(n) + ", m=" + std::to_string(m));
      try {
        const double max_sq = verify_cover(cover, 100000, 1777 + n * 16 + m);
        worst_gap = std::min(worst_gap, 1.0 / m - max_sq);
      } catch (const CoverCounterexample& e) {
        note(out, false, "counterexample at n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                             " (sq dist " + num(e.sq_dist()) + ")");
      }
    }
  }
  out.detail = std::to_string(combos) + " (n,m) combos, 1e5 samples each; min slack to 1/m = " +
               num(worst_gap, 3) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 6: dudley consistency ----

Outcome criterion_dudley() {
  Outcome out;
  std::string vals;
  for (int n : {2, 16, 256, 4096}) {
    const double integral = dudley_integral(n);
    const double a = dudley_constant(n);
    vals += " n=" + std::to_string(n) + ": " + num(integral, 6) + (integral <= a ? "<=" : ">") +
            num(a, 6);
    note(out, integral <= a,
         "entropy integral exceeds a_n at n=" + std::to_string(n) + " (" + num(integral, 6) +
             " > " + num(a, 6) + ")");
  }
  DudleyReport rep = dudley_check(256, 4096, 10000, 2025);
  note(out, rep.empirical_esup <= rep.bound,
       "empirical E sup " + num(rep.empirical_esup) + " exceeds 8 sqrt2 a_n " + num(rep.bound));
  out.detail = "integral vs a_n:" + vals + "; E sup=" + num(rep.empirical_esup, 4) +
               " <= " + num(rep.bound, 4) + " (E||w||_inf=" + num(rep.comparator, 4) + ")" +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 7: rice check ----

Outcome criterion_rice() {
  Outcome out;
  // linear-kernel closed form
  {
    const int n = 8;
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    x0(0) = 10.0;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v(1) = 1.0;
    RiceReport rep = rice_check(KernelSource::linear(), x0, v, 1.0, 257, 100000, 3111);
    const double target = std::atan(0.1) / 3.141592653589793238462643383279502884;
    note(out, std::abs(rep.empirical_mean - target) <= 3.0 * rep.stderr_,
         "linear empirical " + num(rep.empirical_mean, 5) + " vs " + num(target, 5));
    note(out, std::abs(rep.rice_bound - target) <= 1e-4,
         "linear quadrature " + num(rep.rice_bound, 6) + " vs " + num(target, 6));
    note(out, rep.rice_bound <= rep.coarse_bound, "linear coarse-bound ordering");
  }
  // architecture kernels at r = 0.4 ||x0||
  double worst = -kInf;
  for (const auto& [name, arch] : test_arches()) {
    const int n = arch.input_dim();
    RngStream rng(3555, 0);
    Eigen::VectorXd x0 = uniform_vec(n, rng);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    v.normalize();
    const double r = 0.4 * x0.norm();
    RiceReport rep = rice_check(KernelSource::nngp(arch), x0, v, r, 257, 10000, 3777);
    note(out, rep.empirical_mean <= rep.rice_bound + 3.0 * rep.stderr_,
         name + " empirical " + num(rep.empirical_mean) + " above rice bound " +
             num(rep.rice_bound));
    note(out, rep.rice_bound <= rep.coarse_bound * (1.0 + 1e-9),
         name + " rice bound " + num(rep.rice_bound) + " above coarse " +
             num(rep.coarse_bound));
    worst = std::max(worst, rep.empirical_mean - rep.rice_bound);
  }
  out.detail = "linear + 3 arch configs; worst empirical-rice gap = " + num(worst, 3) +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 8: borell-tis tails ----

Outcome criterion_tails() {
  Outcome out;
  for (const auto& [name, arch] : test_arches()) {
    const int n = arch.input_dim();
    RngStream rng(4888, 0);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 32; ++i) pts.push_back(uniform_vec(n, rng));
    GramEnsemble ens = build_ensemble(arch, pts, 0);
    const double sigma = std::sqrt(ens.gram.diagonal().maxCoeff());
    TailReport rep = borell_tis_check(ens, {sigma, 2 * sigma, 3 * sigma}, 10000, 4999);
    for (const auto& row : rep.rows)
      note(out, row.pass, name + " t=" + num(row.t, 3) + " freq " + num(row.frequency) +
                              " above bound " + num(row.bound));
  }
  out.detail = "3 ensembles x t in {sigma, 2sigma, 3sigma} at 1e4 trials" +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 9: gradient correctness ----

Outcome criterion_gradients() {
  Outcome out;
  // points are kept only when no stencil evaluation flips a relu sign: a
  // crossing stencil straddles two linear pieces and is not a gradient probe
  auto sign_pattern_matches = [](const ForwardTrace& a, const ForwardTrace& b) {
    for (size_t l = 0; l + 1 < a.preactivations.size(); ++l)
      for (Eigen::Index k = 0; k < a.preactivations[l].size(); ++k)
        if ((a.preactivations[l].data()[k] > 0.0) != (b.preactivations[l].data()[k] > 0.0))
          return false;
    return true;
  };
  int skipped_kinks = 0;
  for (const auto& [name, arch] : test_arches()) {
    std::vector<int> widths(parameterized_layer_count(arch), 24);
    widths.back() = 1;
    RandomNetwork net = init_random(arch, widths, 5777);
    RngStream rng(5888, 0);
    const double h = 1e-5;
    int tested = 0;
    double worst = 0.0;
    for (int rep = 0; rep < 1000 && tested < 100; ++rep) {
      Eigen::VectorXd x = uniform_vec(arch.input_dim(), rng);
      ForwardTrace tr = forward(net, x);
      double min_pre = kInf;
      for (size_t l = 0; l + 1 < tr.preactivations.size(); ++l)
        min_pre = std::min(min_pre, tr.preactivations[l].cwiseAbs().minCoeff());
      if (min_pre < 1e-6) continue;
      const Eigen::VectorXd g = gradient(net, x);
      const double scale = std::max(1e-12, g.cwiseAbs().maxCoeff());
      double point_worst = 0.0;
      bool clean = true;
      for (int i = 0; i < x.size() && clean; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        ForwardTrace tp = forward(net, xp), tm = forward(net, xm);
        clean = sign_pattern_matches(tp, tm);
        point_worst = std::max(point_worst, std::abs((tp.phi - tm.phi) / (2 * h) - g(i)) / scale);
      }
      if (!clean) {
        ++skipped_kinks;
        continue;
      }
      ++tested;
      worst = std::max(worst, point_worst);
    }
    note(out, tested >= 100, name + ": only " + std::to_string(tested) + " filtered points");
    note(out, worst <= 1e-4, name + ": worst relative gradient error " + num(worst, 3));
  }
  out.detail = "100 non-kink points per arch at h=1e-5; " + std::to_string(skipped_kinks) +
               " kink-straddling points excluded" + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// ---- criterion 10: formula regressions ----

Outcome criterion_formulas() {
  Outcome out;
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
  };

  struct PsiRef { double t, v; };
  const PsiRef psi_refs[] = {
      {-1, 0.0},
      {-0.75, 0.03800210755193428101},
      {-0.5, 0.10899778104422935809},
      {-0.25, 0.20330987784454146373},
      {0, 0.31830988618379067154},
      {0.25, 0.45330987784454146373},
      {0.5, 0.60899778104422935809},
      {0.75, 0.78800210755193428101},
      {0.9, 0.9095383988446720762},
      {0.99, 0.99030025573315434186},
      {1, 1.0},
  };
  for (const auto& r : psi_refs)
    note(out, close(psi(r.t), r.v), "psi(" + num(r.t) + ")");

  struct AnRef { int n; double a; };
  const AnRef an_refs[] = {
      {2, 1.4895793836854737667},   {3, 1.9175516386408153484},
      {10, 3.4331624902099246042},  {64, 6.3465684038341449046},
      {256, 8.8995712124342969194}, {784, 11.166575388222905779},
      {1024, 11.732877282376304228}, {4096, 14.82056209722956179},
      {65536, 21.684161948186554632},
  };
  for (const auto& r : an_refs)
    note(out, close(dudley_constant(r.n), r.a), "a_n(" + std::to_string(r.n) + ")");

  struct RadRef { double norm2, delta, M; int n; double r1, rseg; };
  const RadRef rad_refs[] = {
      {1, 0.1, 1, 2, 0.0064739657299819370755, 0.061101547035165728938},
      {10, 0.5, 1, 784, 0.048637636321004072235, 3.0550773517582864469},
      {3.5, 0.3, 2, 1024, 0.0048650268106373115847, 0.46189588881286475529},
      {0.25, 0.9, 0.5, 16, 0.011507845581036464913, 0.1706730734238246327},
      {100, 0.01, 4, 4096, 0.0018411363276665209433, 0.28196980012346618654},
  };
  for (const auto& r : rad_refs) {
    RobustnessCertificate c = certify(r.norm2, r.delta, r.M, r.n);
    note(out, close(c.r_l1, r.r1), "r_l1 at n=" + std::to_string(r.n));
    note(out, close(c.r_segment, r.rseg), "r_segment at n=" + std::to_string(r.n));
  }

  struct FpRef { double r, norm2, M; int n; double seg, ball; };
  const FpRef fp_refs[] = {
      {1, 10, 1, 784, 0.070735530263064593675, 1.0},
      {0.01, 3.5, 2, 1024, 0.0036482508445133601322, 0.61444295611593725306},
      {0.2, 2, 0.5, 16, 0.035367765131532296838, 1.0},
      {0.003, 1, 1, 64, 0.0019156061355092718448, 0.17539824841162854445},
  };
  for (const auto& r : fp_refs) {
    note(out, close(failure_prob(r.r, r.norm2, r.M, r.n, CertRegion::kSegment), r.seg),
         "failure_prob segment r=" + num(r.r));
    note(out, close(failure_prob(r.r, r.norm2, r.M, r.n, CertRegion::kBall), r.ball),
         "failure_prob ball r=" + num(r.r));
  }

  struct CovRef { int n; double eps, v; };
  const CovRef cov_refs[] = {
      {4, 0.75, 40.317473596635941273},
      {2, 0.5, 25.0},
      {2, 0.8, 8.7240618613220612737},
      {16, 0.3, 52952765693967616.95},
      {16, 0.2, 45949729863572161.0},
      {64, 0.9, 399.47884881171945418},
      {10, 0.05, 13422659310152401.0},
      {8, 1.5, 1.0},
      {100, 0.999, 202.13381275232149659},
  };
  for (const auto& r : cov_refs)
    note(out, close(covering_bound(r.n, r.eps), r.v),
         "covering_bound(" + std::to_string(r.n) + ", " + num(r.eps) + ")");

  out.detail = "38 pinned values at 1e-12 relative tolerance" +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Entry entries[] = {
      {1, "scaling reproduction (medians, slopes, profile)", criterion_scaling},
      {2, "certificate soundness (crossing <= delta + 2se)", criterion_certificates},
      {3, "analytic crossing oracle (arctan law)", criterion_crossing_oracle},
      {4, "master-theorem convergence (width ladder)", criterion_master_theorem},
      {5, "covering exactness (lattice + Monte-Carlo)", criterion_covering},
      {6, "dudley consistency (entropy integral, E sup)", criterion_dudley},
      {7, "rice zero counts (quadrature + coarse bound)", criterion_rice},
      {8, "borell-tis tails", criterion_tails},
      {9, "gradient correctness (central differences)", criterion_gradients},
      {10, "formula regressions (pinned references)", criterion_formulas},
  };

  int failures = 0;
  for (const auto& e : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = e.run();
    } catch (const std::exception& ex) {
      out.pass = false;
      out.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("CRITERION %2d [%s]: %s (%.1fs) - %s\n", e.id, out.pass ? "PASS" : "FAIL",
                e.name, secs, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures;
}
