#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nngpcert/arch.hpp"
#include "nngpcert/harness.hpp"
#include "nngpcert/stats.hpp"

using namespace nngpcert;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("nngpcert_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_fc_arch(const fs::path& dir, int channels) {
  ArchSpec arch = fc_arch(channels, 2, 1.2, 0.1);
  const fs::path p = dir / "arch.json";
  std::ofstream out(p);
  out << arch_to_json(arch);
  return p.string();
}

long count_lines(const std::string& text) {
  long n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("fit_loglog") {
  SUBCASE("exact power law is recovered exactly") {
    std::vector<double> xs{4, 16, 64, 256}, ys;
    for (double x : xs) ys.push_back(3.7 * std::pow(x, 0.5));
    LogLogFit fit = fit_loglog(xs, ys);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::exp(fit.intercept) == doctest::Approx(3.7).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant data has zero slope") {
    std::vector<double> xs{2, 4, 8, 16}, ys{5, 5, 5, 5};
    LogLogFit fit = fit_loglog(xs, ys);
    CHECK(fit.slope == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0));
  }
  SUBCASE("agrees with an independent least-squares implementation") {
    // medians rising roughly 3x over a 16x dimension range, with wobble
    std::vector<double> xs{64, 128, 256, 512, 1024}, ys{1.0, 1.45, 1.9, 2.45, 3.1};
    LogLogFit fit = fit_loglog(xs, ys);

    Eigen::MatrixXd A(xs.size(), 2);
    Eigen::VectorXd b(ys.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      A(i, 0) = 1.0;
      A(i, 1) = std::log(xs[i]);
      b(i) = std::log(ys[i]);
    }
    Eigen::VectorXd beta = A.colPivHouseholderQr().solve(b);
    CHECK(fit.intercept == doctest::Approx(beta(0)).epsilon(1e-10));
    CHECK(fit.slope == doctest::Approx(beta(1)).epsilon(1e-10));
    const double ss_res = (b - A * beta).squaredNorm();
    const double ss_tot = (b.array() - b.mean()).matrix().squaredNorm();
    CHECK(fit.r2 == doctest::Approx(1.0 - ss_res / ss_tot).epsilon(1e-10));
  }
  SUBCASE("rejects bad input") {
    CHECK_THROWS_AS(fit_loglog({1, 2}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({1, 2, -3}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({1, 2, 3}, {1, 0, 3}), std::invalid_argument);
  }
}

TEST_CASE("percentile_profile") {
  SUBCASE("uniform distances give a linear profile with slope a") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> d(5000);
    for (auto& v : d) v = u(rng);
    PercentileProfile prof = percentile_profile(d);
    CHECK(prof.fit_slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(prof.fit_r2 >= 0.99);
    CHECK(prof.percentiles.front() == 0.0);
    CHECK(prof.percentiles.back() == 1.0);
  }
  SUBCASE("constant distances give slope 0") {
    std::vector<double> d(200, 1.25);
    PercentileProfile prof = percentile_profile(d);
    CHECK(prof.fit_slope == doctest::Approx(0.0));
  }
  SUBCASE("needs at least 100 records") {
    std::vector<double> d(99, 1.0);
    CHECK_THROWS_AS(percentile_profile(d), std::invalid_argument);
  }
}

TEST_CASE("config validation") {
  SUBCASE("seed is mandatory") {
    CHECK_THROWS_AS(make_config("covering", json{{"n", 2}, {"m", 2}}, json::object()),
                    ConfigError);
  }
  SUBCASE("unknown subcommand is rejected") {
    CHECK_THROWS_AS(make_config("florble", json{{"seed", 1}}, json::object()), ConfigError);
  }
  SUBCASE("empty dimension sweep fails validation with no files written") {
    fs::path dir = fresh_dir("empty_sweep");
    RunConfig cfg = make_config(
        "attack-scaling",
        json{{"seed", 1}, {"dims", json::array()}, {"out", (dir / "out").string()}},
        json::object());
    CHECK_THROWS_AS(run_config(cfg), ConfigError);
    CHECK(!fs::exists(dir / "out"));
  }
  SUBCASE("config hash is stable and order-sensitive to content") {
    RunConfig a = make_config("covering", json{{"seed", 1}, {"n", 2}, {"m", 2}}, json::object());
    RunConfig b = make_config("covering", json{{"seed", 1}, {"n", 2}, {"m", 2}}, json::object());
    RunConfig c = make_config("covering", json{{"seed", 2}, {"n", 2}, {"m", 2}}, json::object());
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
  }
}

TEST_CASE("covering pipeline runs and reports pass") {
  fs::path dir = fresh_dir("covering");
  RunConfig cfg = make_config(
      "covering",
      json{{"seed", 9}, {"n", 3}, {"m", 2}, {"samples", 2000}, {"out", dir.string()}},
      json::object());
  RunOutcome out = run_config(cfg);
  CHECK(out.exit_code == 0);
  CHECK(out.files_written.size() == 2);  // csv + summary
  for (const auto& f : out.files_written) CHECK(fs::exists(f));
}

TEST_CASE("same config and seed produce byte-identical CSV bodies") {
  fs::path dir1 = fresh_dir("det1");
  fs::path dir2 = fresh_dir("det2");
  const std::string arch1 = write_fc_arch(dir1, 6);
  const std::string arch2 = write_fc_arch(dir2, 6);

  auto run_in = [&](const fs::path& dir, const std::string& arch) {
    json doc{{"seed", 33},
             {"arch", arch},
             {"kernel", "nngp"},
             {"x0", "uniform01"},
             {"region", "segment"},
             {"r", 0.05},
             {"grid_size", 33},
             {"trials", 2000},
             {"out", (dir / "out").string()}};
    return run_config(make_config("gp-crossing", doc, json::object()));
  };
  RunOutcome o1 = run_in(dir1, arch1);
  RunOutcome o2 = run_in(dir2, arch2);
  REQUIRE(o1.files_written.size() == o2.files_written.size());
  // CSV bodies (not summaries, which embed absolute paths) must match
  for (size_t i = 0; i < o1.files_written.size(); ++i) {
    if (o1.files_written[i].ends_with(".csv")) {
      CHECK(slurp(o1.files_written[i]) == slurp(o2.files_written[i]));
    }
  }
}

TEST_CASE("attack-scaling emits the promised row counts") {
  fs::path dir = fresh_dir("scaling_rows");
  json doc{{"seed", 21},
           {"dims", {6, 8, 12}},
           {"nets_per_dim", 2},
           {"points_per_net", 2},
           {"width", 16},
           {"check_slopes", false},
           {"out", dir.string()}};
  RunOutcome out = run_config(make_config("attack-scaling", doc, json::object()));
  std::string medians_csv;
  for (const auto& f : out.files_written)
    if (f.find("_medians") != std::string::npos && f.find("rel") == std::string::npos)
      medians_csv = f;
  REQUIRE(!medians_csv.empty());
  // 3 dims x 3 norms = 9 data rows + header
  CHECK(count_lines(slurp(medians_csv)) == 10);
}

TEST_CASE("exit codes encode bound-check outcomes") {
  SUBCASE("a certified run passes with exit 0") {
    fs::path dir = fresh_dir("exit0");
    const std::string arch = write_fc_arch(dir, 6);
    json doc{{"seed", 3}, {"arch", arch}, {"norm2", 5.0}, {"delta", 0.25}, {"out", dir.string()}};
    CHECK(run_config(make_config("certify", doc, json::object())).exit_code == 0);
  }
  SUBCASE("a crafted failing bound exits 1") {
    fs::path dir = fresh_dir("exit1");
    // linear kernel crossing on a long orthogonal segment has probability
    // ~0.46; demanding it stay below 0.01 must fail
    json doc{{"seed", 3},      {"kernel", "linear"}, {"dim", 4},
             {"x0", json{{"e1_scale", 1.0}}},        {"region", "segment"},
             {"direction", "e2"},                    {"r", 30.0},
             {"bound", 0.01},  {"grid_size", 65},    {"trials", 3000},
             {"out", dir.string()}};
    RunOutcome out = run_config(make_config("gp-crossing", doc, json::object()));
    CHECK(out.exit_code == 1);
  }
  SUBCASE("config errors surface before any run") {
    CHECK_THROWS_AS(run_config(make_config("gp-crossing", json{{"seed", 1}}, json::object())),
                    ConfigError);
  }
}
