#include "nngpcert/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "nngpcert/arch.hpp"
#include "nngpcert/certificate.hpp"
#include "nngpcert/covering.hpp"
#include "nngpcert/gp.hpp"
#include "nngpcert/kernel.hpp"
#include "nngpcert/randnet.hpp"
#include "nngpcert/rng.hpp"
#include "nngpcert/stats.hpp"

namespace nngpcert {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr uint64_t kStreamX0 = 0x1000000000001ull;
constexpr uint64_t kStreamDirection = 0x1000000000002ull;
constexpr uint64_t kStreamPoints = 0x1000000000100ull;  // + point index

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(uint64_t v) { return std::to_string(v); }

// short form for row labels
std::string label(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double parse_norm(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
    throw ConfigError("unrecognized norm '" + s + "' (use a number or \"inf\")");
  }
  return j.get<double>();
}

std::string norm_name(double p) {
  if (std::isinf(p)) return "inf";
  if (p == static_cast<int>(p)) return std::to_string(static_cast<int>(p));
  return fmt(p);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::logic_error("CSV arity mismatch");
    rows_.push_back(std::move(cells));
  }
  std::size_t size() const { return rows_.size(); }
  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
    out << "\n";
    for (const auto& r : rows_) {
      for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << "\n";
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

Eigen::VectorXd load_tensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tensor file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<double> vals;
  // JSON array or whitespace-separated numbers
  try {
    json j = json::parse(text);
    if (j.is_array()) {
      for (const auto& v : j) vals.push_back(v.get<double>());
    } else {
      throw ConfigError("tensor file must be a JSON array or whitespace numbers");
    }
  } catch (const json::exception&) {
    std::istringstream is(text);
    double v;
    while (is >> v) vals.push_back(v);
    if (vals.empty()) throw ConfigError("tensor file has no numbers: " + path);
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Eigen::VectorXd uniform01_vector(int n, uint64_t seed, uint64_t stream) {
  RngStream rng(seed, stream);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform();
  return x;
}

struct PipelineContext {
  const RunConfig& config;
  RunOutcome outcome;
  fs::path dir;
  std::string stem;

  void add_row(ResultRow row) {
    if (row.has_bound && !row.pass) outcome.exit_code = std::max(outcome.exit_code, 1);
    outcome.rows.push_back(std::move(row));
  }
  void emit_csv(const CsvWriter& csv, const std::string& suffix = "") {
    const fs::path p = dir / (stem + suffix + ".csv");
    csv.write(p);
    outcome.files_written.push_back(p.string());
  }
  void emit_summary(json extra = json::object()) {
    json doc;
    doc["experiment"] = config.subcommand;
    doc["config_hash"] = config_hash(config);
    doc["seed"] = config.seed;
    doc["params"] = config.params;
    doc["rows"] = json::array();
    bool all_pass = true;
    for (const auto& r : outcome.rows) {
      json jr;
      jr["experiment"] = r.experiment;
      jr["metric"] = r.metric;
      jr["value"] = r.value;
      jr["stderr"] = r.stderr_;
      if (r.has_bound) {
        jr["bound"] = r.bound;
        jr["pass"] = r.pass;
        all_pass = all_pass && r.pass;
      }
      doc["rows"].push_back(jr);
    }
    doc["pass"] = all_pass;
    for (auto& [k, v] : extra.items()) doc[k] = v;
    const fs::path p = dir / (stem + "_summary.json");
    std::ofstream out(p, std::ios::binary);
    out << doc.dump(2) << "\n";
    outcome.files_written.push_back(p.string());
  }
};

std::vector<std::string> result_row_cells(const ResultRow& r) {
  return {r.experiment, r.metric, fmt(r.value), fmt(r.stderr_),
          r.has_bound ? fmt(r.bound) : "", r.has_bound ? (r.pass ? "1" : "0") : ""};
}

CsvWriter result_csv() {
  return CsvWriter({"experiment", "metric", "value", "stderr", "bound", "pass"});
}

// ---- certify ----

void run_certify(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  if (!p.contains("arch")) throw ConfigError("certify: missing 'arch'");
  ArchSpec arch = load_arch_file(p.at("arch").get<std::string>());
  const SmoothnessConstants sc = smoothness_constants(arch);
  const int n = arch.input_dim();

  double norm2;
  if (p.contains("norm2")) {
    norm2 = p.at("norm2").get<double>();
  } else if (p.contains("x0")) {
    Eigen::VectorXd x0 = load_tensor_file(p.at("x0").get<std::string>());
    if (x0.size() != n)
      throw ConfigError("certify: x0 has dimension " + std::to_string(x0.size()) +
                        ", architecture expects " + std::to_string(n));
    norm2 = x0.norm();
  } else {
    throw ConfigError("certify: provide 'norm2' or 'x0'");
  }

  std::vector<double> deltas;
  if (p.contains("deltas"))
    deltas = p.at("deltas").get<std::vector<double>>();
  else if (p.contains("delta"))
    deltas.push_back(p.at("delta").get<double>());
  else
    throw ConfigError("certify: provide 'delta' or 'deltas'");

  std::vector<double> ps{1.0, 2.0, kInf};
  if (p.contains("p")) {
    ps.clear();
    for (const auto& jp : p.at("p")) ps.push_back(parse_norm(jp));
  }
  const bool tight = p.value("tight_ball", false);

  CsvWriter csv = result_csv();
  json records = json::array();
  for (double delta : deltas) {
    RobustnessCertificate cert = certify(norm2, delta, sc.M, n, tight);
    const std::string id = "delta=" + label(delta);
    json rec;
    rec["n"] = n;
    rec["delta"] = delta;
    rec["M"] = cert.M;
    rec["norm2_x0"] = norm2;
    rec["a_n"] = cert.a_n;
    rec["r_l1"] = cert.r_l1;
    rec["r_segment"] = cert.r_segment;
    rec["tight_ball"] = tight;
    rec["degenerate"] = cert.degenerate;
    json rlp = json::object();
    for (double pq : ps) rlp[norm_name(pq)] = cert.r_lp(pq);
    rec["r_lp"] = rlp;
    records.push_back(rec);

    ctx.add_row({id, "r_l1", cert.r_l1, 0.0, 0.0, false, true});
    ctx.add_row({id, "r_segment", cert.r_segment, 0.0, 0.0, false, true});
    for (double pq : ps)
      ctx.add_row({id, "r_lp_" + norm_name(pq), cert.r_lp(pq), 0.0, 0.0, false, true});
    if (!cert.degenerate) {
      const double pb = failure_prob(cert.r_l1, norm2, sc.M, n, CertRegion::kBall);
      const double pseg = failure_prob(cert.r_segment, norm2, sc.M, n, CertRegion::kSegment);
      ctx.add_row({id, "failure_prob_at_r_l1", pb, 0.0, delta, true, pb <= delta + 1e-12});
      ctx.add_row({id, "failure_prob_at_r_segment", pseg, 0.0, delta, true, pseg <= delta + 1e-12});
    }
  }
  for (const auto& r : ctx.outcome.rows) csv.row(result_row_cells(r));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"certificates", records}});
}

// ---- covering ----

void run_covering(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  const int n = p.at("n").get<int>();
  const int m = p.at("m").get<int>();
  const std::size_t samples = p.value("samples", 100000);

  LatticeCover cover = lattice_cover(n, m);
  const auto formula = lattice_cardinality(n, m);
  const bool card_ok = cover.centers.size() == formula;
  ctx.add_row({"covering", "cardinality_enumerated", static_cast<double>(cover.centers.size()),
               0.0, static_cast<double>(formula), true, card_ok});

  bool mc_ok = true;
  double max_sq = 0.0;
  try {
    max_sq = verify_cover(cover, samples, ctx.config.seed);
  } catch (const CoverCounterexample& e) {
    mc_ok = false;
    max_sq = e.sq_dist();
  }
  ctx.add_row({"covering", "max_nearest_sq_dist", max_sq, 0.0, 1.0 / m, true, mc_ok});
  ctx.add_row({"covering", "radius_bound", cover.radius_bound, 0.0, 0.0, false, true});

  CsvWriter csv = result_csv();
  for (const auto& r : ctx.outcome.rows) csv.row(result_row_cells(r));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"n", n}, {"m", m}, {"samples", samples}});
}

// ---- gp shared plumbing ----

struct GpSetup {
  KernelSource kernel = KernelSource::linear();
  ArchSpec arch;  // kept alive for the source
  bool is_linear = true;
  int dim = 0;
  Eigen::VectorXd x0;
  double M = 1.0;
};

GpSetup gp_setup(const json& p, uint64_t seed) {
  GpSetup s;
  const std::string kernel = p.value("kernel", std::string("nngp"));
  if (kernel == "linear") {
    s.is_linear = true;
    if (!p.contains("dim")) throw ConfigError("linear kernel requires 'dim'");
    s.dim = p.at("dim").get<int>();
    s.kernel = KernelSource::linear();
    s.M = 1.0;
  } else if (kernel == "nngp") {
    if (!p.contains("arch")) throw ConfigError("nngp kernel requires 'arch'");
    s.arch = load_arch_file(p.at("arch").get<std::string>());
    s.is_linear = false;
    s.dim = s.arch.input_dim();
    s.kernel = KernelSource::nngp(s.arch);
    s.M = smoothness_constants(s.arch).M;
  } else {
    throw ConfigError("kernel must be 'nngp' or 'linear'");
  }

  if (!p.contains("x0")) throw ConfigError("missing 'x0'");
  const json& jx = p.at("x0");
  if (jx.is_string()) {
    const std::string sx = jx.get<std::string>();
    if (sx == "uniform01")
      s.x0 = uniform01_vector(s.dim, seed, kStreamX0);
    else
      s.x0 = load_tensor_file(sx);
  } else if (jx.is_object() && jx.contains("e1_scale")) {
    s.x0 = Eigen::VectorXd::Zero(s.dim);
    s.x0(0) = jx.at("e1_scale").get<double>();
  } else {
    throw ConfigError("x0 must be a file path, \"uniform01\", or {\"e1_scale\": R}");
  }
  if (s.x0.size() != s.dim) throw ConfigError("x0 dimension mismatch");
  return s;
}

Eigen::VectorXd parse_direction(const json& p, const GpSetup& s, uint64_t seed) {
  const json& jd = p.contains("direction") ? p.at("direction") : json("random");
  Eigen::VectorXd v;
  if (jd.is_string()) {
    const std::string sd = jd.get<std::string>();
    if (sd == "random") {
      RngStream rng(seed, kStreamDirection);
      v.resize(s.dim);
      for (int i = 0; i < s.dim; ++i) v(i) = rng.normal();
    } else if (sd == "e1") {
      v = Eigen::VectorXd::Zero(s.dim);
      v(0) = 1.0;
    } else if (sd == "e2") {
      if (s.dim < 2) throw ConfigError("direction e2 needs dim >= 2");
      v = Eigen::VectorXd::Zero(s.dim);
      v(1) = 1.0;
    } else {
      v = load_tensor_file(sd);
    }
  } else {
    throw ConfigError("direction must be \"random\", \"e1\", \"e2\", or a file path");
  }
  const double norm = v.norm();
  if (!(norm > 0.0)) throw ConfigError("direction has zero norm");
  return v / norm;
}

// ---- gp-crossing ----

void run_gp_crossing(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  GpSetup s = gp_setup(p, ctx.config.seed);
  const std::string region_kind = p.value("region", std::string("ball"));
  const int grid_size = p.value("grid_size", 512);
  const int trials = p.value("trials", 10000);
  const double pnorm = p.contains("p") ? parse_norm(p.at("p")) : 1.0;

  struct Case {
    std::string id;
    double r;
    double bound;      // one-sided upper bound (delta); <= 0 means none
    double target;     // two-sided target; NaN means none
  };
  std::vector<Case> cases;
  const json& jr = p.contains("r") ? p.at("r") : json("certified");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (jr.is_string() && jr.get<std::string>() == "certified") {
    if (!p.contains("deltas")) throw ConfigError("certified radius needs 'deltas'");
    for (double delta : p.at("deltas").get<std::vector<double>>()) {
      RobustnessCertificate cert = certify(s.x0.norm(), delta, s.M, s.dim);
      const double r = (region_kind == "segment") ? cert.r_segment : cert.r_lp(pnorm);
      cases.push_back({"delta=" + label(delta), r, delta, nan});
    }
  } else {
    Case c{"r=" + label(jr.get<double>()), jr.get<double>(), -1.0, nan};
    if (p.contains("bound")) c.bound = p.at("bound").get<double>();
    if (p.contains("target")) c.target = p.at("target").get<double>();
    cases.push_back(c);
  }

  Eigen::VectorXd dir;
  if (region_kind == "segment") dir = parse_direction(p, s, ctx.config.seed);

  for (const auto& c : cases) {
    Region region = (region_kind == "segment") ? Region(SegmentRegion{dir, c.r})
                                               : Region(BallRegion{c.r, pnorm});
    CrossingEstimate est =
        crossing_probability(s.kernel, s.x0, region, grid_size, trials, ctx.config.seed);
    ResultRow row{c.id, "crossing_probability", est.estimate, est.stderr_, 0.0, false, true};
    if (!std::isnan(c.target)) {
      row.bound = c.target;
      row.has_bound = true;
      row.pass = std::abs(est.estimate - c.target) <= 3.0 * std::max(est.stderr_, 1e-12);
    } else if (c.bound >= 0.0) {
      row.bound = c.bound;
      row.has_bound = true;
      row.pass = est.estimate <= c.bound + 2.0 * est.stderr_;
    }
    ctx.add_row(row);
    ctx.add_row({c.id, "r", c.r, 0.0, 0.0, false, true});
  }

  CsvWriter csv = result_csv();
  for (const auto& r : ctx.outcome.rows) csv.row(result_row_cells(r));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"region", region_kind}, {"grid_size", grid_size}, {"trials", trials}});
}

// ---- gp-rice ----

void run_gp_rice(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  GpSetup s = gp_setup(p, ctx.config.seed);
  Eigen::VectorXd v = parse_direction(p, s, ctx.config.seed);
  const int grid_size = p.value("grid_size", 256);
  const int trials = p.value("trials", 10000);
  double r;
  if (p.at("r").is_object())
    r = p.at("r").at("fraction").get<double>() * s.x0.norm();
  else
    r = p.at("r").get<double>();

  RiceReport rep = rice_check(s.kernel, s.x0, v, r, grid_size, trials, ctx.config.seed);
  ctx.add_row({"rice", "empirical_mean_zeros", rep.empirical_mean, rep.stderr_,
               rep.rice_bound + 3.0 * rep.stderr_, true,
               rep.empirical_mean <= rep.rice_bound + 3.0 * rep.stderr_});
  ctx.add_row({"rice", "rice_bound", rep.rice_bound, 0.0, rep.coarse_bound, true,
               rep.rice_bound <= rep.coarse_bound * (1.0 + 1e-9)});
  ctx.add_row({"rice", "coarse_bound", rep.coarse_bound, 0.0, 0.0, false, true});
  if (p.contains("target")) {
    const double target = p.at("target").get<double>();
    ctx.add_row({"rice", "empirical_vs_target", rep.empirical_mean, rep.stderr_, target, true,
                 std::abs(rep.empirical_mean - target) <= 3.0 * std::max(rep.stderr_, 1e-12)});
    ctx.add_row({"rice", "rice_bound_vs_target", rep.rice_bound, 0.0, target, true,
                 std::abs(rep.rice_bound - target) <= 1e-4 * std::max(1.0, std::abs(target))});
  }

  CsvWriter csv = result_csv();
  for (const auto& row : ctx.outcome.rows) csv.row(result_row_cells(row));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"r", r}, {"grid_size", grid_size}, {"trials", trials}});
}

// ---- gp-tails ----

void run_gp_tails(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  const int trials = p.value("trials", 10000);

  if (p.contains("points") || p.contains("arch") || p.value("kernel", "") == std::string("linear")) {
    GpSetup s = gp_setup(p, ctx.config.seed);
    const int m = p.value("points", 32);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(m);
    pts.push_back(s.x0);
    for (int i = 1; i < m; ++i)
      pts.push_back(uniform01_vector(s.dim, ctx.config.seed, kStreamPoints + i));
    GramEnsemble ens = build_ensemble(s.kernel, std::move(pts), ctx.config.seed);

    std::vector<double> mult = p.value("t_multipliers", std::vector<double>{1.0, 2.0, 3.0});
    const double sigma = std::sqrt(std::max(0.0, ens.gram.diagonal().maxCoeff()));
    std::vector<double> ts;
    for (double mlt : mult) ts.push_back(mlt * sigma);
    TailReport rep = borell_tis_check(ens, ts, trials, ctx.config.seed);
    ctx.add_row({"borell_tis", "empirical_esup", rep.empirical_esup, 0.0, 0.0, false, true});
    ctx.add_row({"borell_tis", "sigma", rep.sigma, 0.0, 0.0, false, true});
    for (const auto& row : rep.rows)
      ctx.add_row({"borell_tis", "exceedance_t=" + label(row.t), row.frequency, row.stderr_,
                   row.bound + 3.0 * row.stderr_, true, row.pass});
  }

  if (p.contains("dudley")) {
    const json& jd = p.at("dudley");
    DudleyReport rep = dudley_check(jd.at("n").get<int>(), jd.at("cloud").get<int>(),
                                    jd.value("trials", trials), ctx.config.seed);
    ctx.add_row({"dudley", "empirical_esup", rep.empirical_esup, 0.0, rep.bound, true,
                 rep.empirical_esup <= rep.bound});
    ctx.add_row({"dudley", "e_sup_norm_comparator", rep.comparator, 0.0, 0.0, false, true});
  }

  if (ctx.outcome.rows.empty())
    throw ConfigError("gp-tails: provide an ensemble (arch/kernel + points) and/or 'dudley'");

  CsvWriter csv = result_csv();
  for (const auto& row : ctx.outcome.rows) csv.row(result_row_cells(row));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"trials", trials}});
}

// ---- verify-kernel ----

void run_verify_kernel(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  if (!p.contains("arch")) throw ConfigError("verify-kernel: missing 'arch'");
  ArchSpec arch = load_arch_file(p.at("arch").get<std::string>());
  const std::vector<int> widths = p.at("widths").get<std::vector<int>>();
  if (widths.empty()) throw ConfigError("verify-kernel: 'widths' must be nonempty");
  const int m = p.value("points", 10);
  const int draws = p.value("draws", 4000);
  const double max_final = p.value("max_final_error", 0.1);

  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < m; ++i)
    pts.push_back(uniform01_vector(arch.input_dim(), ctx.config.seed, kStreamPoints + i));
  const Eigen::MatrixXd exact = kernel_matrix(arch, pts);
  const double exact_norm = exact.norm();

  std::vector<double> errors;
  for (int w : widths) {
    std::vector<int> layer_widths(parameterized_layer_count(arch), w);
    layer_widths.back() = 1;
    const Eigen::MatrixXd emp = empirical_kernel(arch, layer_widths, pts, draws, ctx.config.seed);
    const double rel = (emp - exact).norm() / exact_norm;
    errors.push_back(rel);
    ctx.add_row({"width=" + std::to_string(w), "rel_frobenius_error", rel, 0.0, 0.0, false, true});
  }
  bool decreasing = true;
  for (size_t i = 1; i < errors.size(); ++i) decreasing = decreasing && errors[i] < errors[i - 1];
  ctx.add_row({"convergence", "strictly_decreasing", decreasing ? 1.0 : 0.0, 0.0, 1.0, true,
               decreasing});
  ctx.add_row({"convergence", "final_rel_error", errors.back(), 0.0, max_final, true,
               errors.back() <= max_final});

  CsvWriter csv = result_csv();
  for (const auto& row : ctx.outcome.rows) csv.row(result_row_cells(row));
  ctx.emit_csv(csv);
  ctx.emit_summary(json{{"widths", widths}, {"points", m}, {"draws", draws}});
}

// ---- attack-scaling ----

ScalingConfig scaling_config_from(const json& p, uint64_t seed) {
  ScalingConfig cfg;
  cfg.dims = p.at("dims").get<std::vector<int>>();
  if (cfg.dims.empty()) throw ConfigError("attack-scaling: dimension sweep must be nonempty");
  cfg.nets_per_dim = p.value("nets_per_dim", 10);
  cfg.points_per_net = p.value("points_per_net", 10);
  if (p.contains("norms")) {
    cfg.norms.clear();
    for (const auto& jn : p.at("norms")) cfg.norms.push_back(parse_norm(jn));
  }
  cfg.hidden_layers = p.value("hidden_layers", 3);
  cfg.width = p.value("width", 256);
  cfg.sigma_w = p.value("sigma_w", cfg.sigma_w);
  cfg.sigma_b = p.value("sigma_b", cfg.sigma_b);
  cfg.tolerance = p.value("tolerance", 0.0);
  cfg.max_grad_steps = p.value("max_grad_steps", 2000);
  cfg.seed = seed;
  return cfg;
}

void emit_scaling_outputs(PipelineContext& ctx, const ScalingResult& res, bool check_slopes,
                          const std::vector<double>& quantile_deltas) {
  const ScalingConfig& cfg = res.config;

  CsvWriter medians({"n", "p", "median", "p45", "p55", "censored_count", "nets", "points", "seed"});
  CsvWriter rel_medians(
      {"n", "p", "median", "p45", "p55", "censored_count", "nets", "points", "seed"});
  for (const auto& c : res.cells) {
    if (c.empty) continue;  // all-censored cells are reported missing, never fabricated
    medians.row({fmt(c.n), norm_name(c.p), fmt(c.median), fmt(c.p45), fmt(c.p55),
                 fmt(c.censored), fmt(cfg.nets_per_dim), fmt(cfg.points_per_net),
                 fmt(cfg.seed)});
    rel_medians.row({fmt(c.n), norm_name(c.p), fmt(c.rel_median), fmt(c.rel_p45), fmt(c.rel_p55),
                     fmt(c.censored), fmt(cfg.nets_per_dim), fmt(cfg.points_per_net),
                     fmt(cfg.seed)});
  }
  CsvWriter records({"n", "p", "distance", "rel_distance", "norm2_x0", "censored"});
  for (const auto& r : res.records)
    records.row({fmt(r.n), norm_name(r.p), fmt(r.distance), fmt(r.rel_distance),
                 fmt(r.norm2_x0), r.censored ? "1" : "0"});
  ctx.emit_csv(medians, "_medians");
  ctx.emit_csv(rel_medians, "_rel_medians");
  ctx.emit_csv(records, "_records");

  for (const auto& c : res.cells) {
    const std::string id = "n=" + fmt(c.n) + ",p=" + norm_name(c.p);
    if (c.empty) {
      ctx.add_row({id, "all_censored", 1.0, 0.0, 0.0, false, true});
      continue;
    }
    ctx.add_row({id, "median", c.median, 0.5 * (c.p55 - c.p45), 0.0, false, true});
    ctx.add_row({id, "rel_median", c.rel_median, 0.5 * (c.rel_p55 - c.rel_p45), 0.0, false, true});
    ctx.add_row({id, "censored", c.censored, 0.0, 0.0, false, true});
  }

  if (check_slopes && cfg.dims.size() >= 3) {
    const double tol = 0.15;
    for (double p : cfg.norms) {
      std::vector<double> xs, ys, rel_ys;
      for (const auto& c : res.cells) {
        if (c.p != p || c.empty) continue;
        xs.push_back(c.n);
        ys.push_back(c.median);
        rel_ys.push_back(c.rel_median);
      }
      if (xs.size() < 3) {
        ctx.add_row({"fit,p=" + norm_name(p), "slope", 0.0, 0.0, 0.0, true, false});
        continue;
      }
      const double target = (p == 1.0) ? 0.5 : (std::isinf(p) ? -0.5 : 0.0);
      LogLogFit fit = fit_loglog(xs, ys);
      ctx.add_row({"fit,p=" + norm_name(p), "slope", fit.slope, fit.slope_stderr, target, true,
                   std::abs(fit.slope - target) <= tol});
      ctx.add_row({"fit,p=" + norm_name(p), "r2", fit.r2, 0.0, 0.0, false, true});
      LogLogFit rel_fit = fit_loglog(xs, rel_ys);
      ctx.add_row({"fit,p=" + norm_name(p), "rel_slope", rel_fit.slope, rel_fit.slope_stderr,
                   -0.5, true, std::abs(rel_fit.slope + 0.5) <= tol});
    }
  }

  // one-sided certificate consistency: the empirical fraction of l1 attack
  // distances below the per-record certified radius must stay below delta
  for (double delta : quantile_deltas) {
    for (int n : cfg.dims) {
      long below = 0, total = 0;
      for (const auto& r : res.records) {
        if (r.n != n || r.p != 1.0) continue;
        ++total;
        const double r_cert = certify(r.norm2_x0, delta, 1.0, n).r_l1;
        if (!r.censored && r.distance < r_cert) ++below;
      }
      if (total == 0) continue;
      const double frac = static_cast<double>(below) / total;
      const double se = std::sqrt(std::max(frac * (1.0 - frac), 1.0 / total) /
                                  static_cast<double>(total));
      ctx.add_row({"cert_quantile,n=" + fmt(n) + ",delta=" + label(delta), "frac_below_r_l1", frac,
                   se, delta + 3.0 * se, true, frac <= delta + 3.0 * se});
    }
  }
}

void run_attack_scaling(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  ScalingConfig cfg = scaling_config_from(p, ctx.config.seed);
  ScalingResult res = scaling_experiment(cfg);
  const bool check_slopes = p.value("check_slopes", true);
  std::vector<double> qdeltas;
  if (p.contains("quantile_check_deltas"))
    qdeltas = p.at("quantile_check_deltas").get<std::vector<double>>();
  emit_scaling_outputs(ctx, res, check_slopes, qdeltas);

  CsvWriter csv = result_csv();
  for (const auto& row : ctx.outcome.rows) csv.row(result_row_cells(row));
  ctx.emit_csv(csv, "_checks");
  ctx.emit_summary();
}

// ---- profile ----

void run_profile(PipelineContext& ctx) {
  const json& p = ctx.config.params;
  ScalingConfig cfg;
  cfg.dims = {p.at("n").get<int>()};
  cfg.nets_per_dim = p.value("nets_per_dim", 10);
  cfg.points_per_net = p.value("points_per_net", 10);
  cfg.norms = {p.contains("p") ? parse_norm(p.at("p")) : 1.0};
  cfg.hidden_layers = p.value("hidden_layers", 3);
  cfg.width = p.value("width", 256);
  cfg.sigma_w = p.value("sigma_w", cfg.sigma_w);
  cfg.sigma_b = p.value("sigma_b", cfg.sigma_b);
  cfg.max_grad_steps = p.value("max_grad_steps", 2000);
  cfg.seed = ctx.config.seed;
  ScalingResult res = scaling_experiment(cfg);

  std::vector<double> distances;
  long censored = 0;
  for (const auto& r : res.records) {
    if (r.censored)
      ++censored;
    else
      distances.push_back(r.distance);
  }
  PercentileProfile prof = percentile_profile(std::move(distances));

  CsvWriter curve({"percentile", "distance"});
  for (size_t i = 0; i < prof.percentiles.size(); ++i)
    curve.row({fmt(prof.percentiles[i]), fmt(prof.distances[i])});
  ctx.emit_csv(curve, "_curve");

  ctx.add_row({"profile", "fit_slope", prof.fit_slope, 0.0, 0.0, false, true});
  ctx.add_row({"profile", "fit_intercept", prof.fit_intercept, 0.0, 0.0, false, true});
  ctx.add_row({"profile", "censored", static_cast<double>(censored), 0.0, 0.0, false, true});
  if (p.contains("min_r2")) {
    const double min_r2 = p.at("min_r2").get<double>();
    ctx.add_row({"profile", "fit_r2", prof.fit_r2, 0.0, min_r2, true, prof.fit_r2 >= min_r2});
  } else {
    ctx.add_row({"profile", "fit_r2", prof.fit_r2, 0.0, 0.0, false, true});
  }

  CsvWriter csv = result_csv();
  for (const auto& row : ctx.outcome.rows) csv.row(result_row_cells(row));
  ctx.emit_csv(csv);
  ctx.emit_summary();
}

}  // namespace

RunConfig make_config(const std::string& subcommand, const json& document,
                      const json& overrides) {
  static const std::vector<std::string> kSubcommands = {
      "certify",       "covering",       "gp-crossing", "gp-rice",
      "gp-tails",      "verify-kernel",  "attack-scaling", "profile"};
  if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end())
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  if (!document.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  cfg.subcommand = subcommand;
  cfg.params = document;
  for (auto& [k, v] : overrides.items()) cfg.params[k] = v;

  if (!cfg.params.contains("seed")) throw ConfigError("seed is mandatory (no wall-clock seeding)");
  cfg.seed = cfg.params.at("seed").get<uint64_t>();
  cfg.out_dir = cfg.params.value("out", std::string("out"));
  cfg.params.erase("out");
  return cfg;
}

RunConfig load_config_file(const std::string& subcommand, const std::string& path,
                           const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return make_config(subcommand, doc, overrides);
}

uint64_t config_hash(const RunConfig& config) {
  const std::string canon = config.subcommand + "\x1f" + config.params.dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunOutcome run_config(const RunConfig& config) {
  PipelineContext ctx{config, RunOutcome{}, fs::path(config.out_dir),
                      config.subcommand + "_" + std::to_string(config_hash(config))};

  // validate before touching the filesystem
  if (config.subcommand == "attack-scaling" || config.subcommand == "profile") {
    // cheap structural validation; throws ConfigError without writing files
    if (config.subcommand == "attack-scaling") scaling_config_from(config.params, config.seed);
    if (config.subcommand == "profile" && !config.params.contains("n"))
      throw ConfigError("profile: missing 'n'");
  }

  fs::create_directories(ctx.dir);
  if (config.subcommand == "certify")
    run_certify(ctx);
  else if (config.subcommand == "covering")
    run_covering(ctx);
  else if (config.subcommand == "gp-crossing")
    run_gp_crossing(ctx);
  else if (config.subcommand == "gp-rice")
    run_gp_rice(ctx);
  else if (config.subcommand == "gp-tails")
    run_gp_tails(ctx);
  else if (config.subcommand == "verify-kernel")
    run_verify_kernel(ctx);
  else if (config.subcommand == "attack-scaling")
    run_attack_scaling(ctx);
  else if (config.subcommand == "profile")
    run_profile(ctx);
  else
    throw ConfigError("unknown subcommand '" + config.subcommand + "'");

  return ctx.outcome;
}

}  // namespace nngpcert
