// nngp-cert: infinite-width kernels, certified robustness radii, and the
// Monte-Carlo verification pipelines behind them. Every subcommand reads a
// JSON config (--config) and/or direct flags, runs deterministically from the
// mandatory seed, and writes CSV + summary artifacts under --out.
//
// Exit status: 0 all bound checks passed, 1 a bound check failed,
// 2 configuration error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nngpcert/harness.hpp"

using nngpcert::ConfigError;
using json = nlohmann::ordered_json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--out", flags.out_dir, "output directory (default: out)");
  cmd->add_option("--seed", flags.seed, "RNG seed (mandatory here or in the config)")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
}

int execute(const std::string& subcommand, const CommonFlags& flags, json overrides) {
  try {
    if (flags.seed_set) overrides["seed"] = static_cast<uint64_t>(flags.seed);
    if (!flags.out_dir.empty()) overrides["out"] = flags.out_dir;
    nngpcert::RunConfig config =
        flags.config_path.empty()
            ? nngpcert::make_config(subcommand, json::object(), overrides)
            : nngpcert::load_config_file(subcommand, flags.config_path, overrides);
    nngpcert::RunOutcome outcome = nngpcert::run_config(config);
    for (const auto& f : outcome.files_written) std::cout << "wrote " << f << "\n";
    int failed = 0;
    for (const auto& r : outcome.rows)
      if (r.has_bound && !r.pass) ++failed;
    if (failed) std::cout << failed << " bound check(s) FAILED\n";
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"infinite-width kernel robustness certificates and their empirical checks"};
  app.require_subcommand(1);

  // certify
  CommonFlags certify_flags;
  std::string certify_arch, certify_x0;
  double certify_norm2 = -1.0, certify_delta = -1.0;
  std::vector<std::string> certify_p;
  bool certify_tight = false;
  auto* certify = app.add_subcommand("certify", "closed-form certified radii for an architecture");
  add_common(certify, certify_flags);
  certify->add_option("--arch", certify_arch, "architecture JSON file");
  certify->add_option("--x0", certify_x0, "input tensor file");
  certify->add_option("--norm2", certify_norm2, "||x0||_2 instead of a tensor file");
  certify->add_option("--delta", certify_delta, "failure probability bound in (0,1)");
  certify->add_option("--p", certify_p, "l^p norms to certify (numbers or inf)");
  certify->add_flag("--tight-ball", certify_tight, "use the proof's tight ball denominator");

  // covering
  CommonFlags covering_flags;
  int covering_n = 0, covering_m = 0;
  long long covering_samples = -1;
  auto* covering = app.add_subcommand("covering", "lattice cover enumeration and verification");
  add_common(covering, covering_flags);
  covering->add_option("--n", covering_n, "dimension");
  covering->add_option("--m", covering_m, "lattice denominator");
  covering->add_option("--samples", covering_samples, "Monte-Carlo samples");

  // config-driven subcommands
  CommonFlags crossing_flags, rice_flags, tails_flags, verify_flags, scaling_flags, profile_flags;
  auto* crossing =
      app.add_subcommand("gp-crossing", "Monte-Carlo boundary-crossing probability");
  add_common(crossing, crossing_flags);
  auto* rice = app.add_subcommand("gp-rice", "zero counts along a segment vs the Rice bound");
  add_common(rice, rice_flags);
  auto* tails = app.add_subcommand("gp-tails", "Borell-TIS tails and the Dudley sup bound");
  add_common(tails, tails_flags);
  auto* verify = app.add_subcommand("verify-kernel", "finite-width kernel convergence");
  add_common(verify, verify_flags);
  auto* scaling = app.add_subcommand("attack-scaling", "adversarial distance scaling experiment");
  add_common(scaling, scaling_flags);
  auto* profile = app.add_subcommand("profile", "distance-by-percentile profile");
  add_common(profile, profile_flags);

  CLI11_PARSE(app, argc, argv);

  if (certify->parsed()) {
    json o = json::object();
    if (!certify_arch.empty()) o["arch"] = certify_arch;
    if (!certify_x0.empty()) o["x0"] = certify_x0;
    if (certify_norm2 >= 0.0) o["norm2"] = certify_norm2;
    if (certify_delta > 0.0) o["delta"] = certify_delta;
    if (!certify_p.empty()) {
      json arr = json::array();
      for (const auto& s : certify_p) {
        if (s == "inf")
          arr.push_back("inf");
        else
          arr.push_back(std::stod(s));
      }
      o["p"] = arr;
    }
    if (certify_tight) o["tight_ball"] = true;
    return execute("certify", certify_flags, o);
  }
  if (covering->parsed()) {
    json o = json::object();
    if (covering_n > 0) o["n"] = covering_n;
    if (covering_m > 0) o["m"] = covering_m;
    if (covering_samples >= 0) o["samples"] = covering_samples;
    return execute("covering", covering_flags, o);
  }
  if (crossing->parsed()) return execute("gp-crossing", crossing_flags, json::object());
  if (rice->parsed()) return execute("gp-rice", rice_flags, json::object());
  if (tails->parsed()) return execute("gp-tails", tails_flags, json::object());
  if (verify->parsed()) return execute("verify-kernel", verify_flags, json::object());
  if (scaling->parsed()) return execute("attack-scaling", scaling_flags, json::object());
  if (profile->parsed()) return execute("profile", profile_flags, json::object());
  return 2;
}
