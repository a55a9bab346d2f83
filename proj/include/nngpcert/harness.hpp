#pragma once

// Run-configuration ingestion and the experiment pipelines behind the CLI.
// Every pipeline is a pure function of (config, seed): jobs may run
// concurrently but results are collected in a fixed order and CSV bodies are
// byte-identical across runs.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nngpcert {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;
  nlohmann::ordered_json params;  // subcommand-specific fields
  uint64_t seed = 0;
  std::string out_dir = "out";
};

// Parses a config document (JSON object) for a subcommand. `overrides` are
// applied on top (CLI flags win). Throws ConfigError on malformed or missing
// mandatory fields (seed in particular; there is no wall-clock seeding).
RunConfig make_config(const std::string& subcommand, const nlohmann::ordered_json& document,
                      const nlohmann::ordered_json& overrides);
RunConfig load_config_file(const std::string& subcommand, const std::string& path,
                           const nlohmann::ordered_json& overrides);

// FNV-1a hash of the canonical config serialization.
uint64_t config_hash(const RunConfig& config);

struct ResultRow {
  std::string experiment;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;  // or half-band width; 0 when not applicable
  double bound = 0.0;    // 0 when not applicable
  bool has_bound = false;
  bool pass = true;
};

struct RunOutcome {
  int exit_code = 0;  // 0 pass, 1 a bound check failed, 2 config error
  std::vector<std::string> files_written;
  std::vector<ResultRow> rows;
};

// Executes the named pipeline and writes its CSV + summary artifacts under
// config.out_dir. Never throws for bound-check failures (encoded in
// exit_code); throws ConfigError only before any file is written.
RunOutcome run_config(const RunConfig& config);

}  // namespace nngpcert
