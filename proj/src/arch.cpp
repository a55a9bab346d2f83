#include "nngpcert/arch.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace nngpcert {

using json = nlohmann::ordered_json;

const char* layer_type_name(const LayerSpec& layer) {
  struct Visitor {
    const char* operator()(const InputConvLayer&) const { return "input_conv"; }
    const char* operator()(const NonlinearLayer&) const { return "nonlinear"; }
    const char* operator()(const SkipLayer&) const { return "skip"; }
    const char* operator()(const PoolLayer&) const { return "pool"; }
    const char* operator()(const FlattenLayer&) const { return "flatten"; }
    const char* operator()(const OutputLayer&) const { return "output"; }
  };
  return std::visit(Visitor{}, layer);
}

int ArchSpec::flatten_index() const {
  for (size_t i = 0; i < layers.size(); ++i)
    if (std::holds_alternative<FlattenLayer>(layers[i])) return static_cast<int>(i);
  throw std::logic_error("architecture has no flatten layer");
}

const PixelGrid& ArchSpec::grid_before_flatten() const {
  int f = flatten_index();
  return f == 0 ? input_grid : grids[f - 1];
}

ArchValidationError::ArchValidationError(std::vector<std::string> violations)
    : std::runtime_error([&violations] {
        std::string msg = "invalid architecture:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

bool patch_rank_ok(const Patch& p, int rank) {
  for (const auto& o : p.offsets)
    if (static_cast<int>(o.size()) != rank) return false;
  return true;
}

void check_patch(const Patch& p, int rank, int layer_idx, std::vector<std::string>& out) {
  const std::string where = "layer " + std::to_string(layer_idx);
  if (p.offsets.empty()) {
    out.push_back(where + ": patch is empty");
    return;
  }
  if (!patch_rank_ok(p, rank)) {
    out.push_back(where + ": patch offset rank does not match grid rank");
    return;
  }
  if (p.has_duplicates()) out.push_back(where + ": duplicate patch offsets");
  if (!p.symmetric())
    out.push_back(where + ": patch is not symmetric under negation (-P must equal P)");
}

void check_sigmas(double sw, double sb, int layer_idx, std::vector<std::string>& out) {
  const std::string where = "layer " + std::to_string(layer_idx);
  if (!(sw > 0.0)) out.push_back(where + ": sigma_w must be > 0");
  if (!(sb >= 0.0)) out.push_back(where + ": sigma_b must be >= 0");
}

}  // namespace

std::vector<std::string> validate_arch(ArchSpec& arch) {
  std::vector<std::string> out;
  if (arch.input_channels < 1) out.push_back("input_channels must be >= 1");
  if (arch.input_grid.rank() == 0) out.push_back("input_dims must be nonempty");
  for (int h : arch.input_grid.dims)
    if (h < 1) out.push_back("input_dims entries must be >= 1");
  if (!out.empty()) return out;

  if (arch.layers.empty()) {
    out.push_back("layers must be nonempty");
    return out;
  }

  const int n = static_cast<int>(arch.layers.size());
  int flatten_count = 0, output_count = 0;
  arch.grids.assign(n, PixelGrid{});

  for (int i = 0; i < n; ++i) {
    const PixelGrid& prev = (i == 0) ? arch.input_grid : arch.grids[i - 1];
    arch.grids[i] = prev;  // default: grid-preserving
    const std::string where = "layer " + std::to_string(i);

    if (const auto* in = std::get_if<InputConvLayer>(&arch.layers[i])) {
      if (i != 0) out.push_back(where + ": input_conv is only allowed as the first layer");
      check_patch(in->patch, arch.input_grid.rank(), i, out);
      check_sigmas(in->sigma_w, in->sigma_b, i, out);
    } else if (const auto* nl = std::get_if<NonlinearLayer>(&arch.layers[i])) {
      if (i == 0) out.push_back(where + ": first layer must be input_conv");
      check_patch(nl->patch, prev.rank(), i, out);
      check_sigmas(nl->sigma_w, nl->sigma_b, i, out);
    } else if (const auto* sk = std::get_if<SkipLayer>(&arch.layers[i])) {
      // This is layer l+1 with l = i preceding layers; gap k must lie in {1..l-2}.
      const int k = sk->gap;
      if (k < 1 || k > i - 2) {
        out.push_back(where + ": skip gap k must satisfy 1 <= k <= l-2 (here l = " +
                      std::to_string(i) + ", k = " + std::to_string(k) + ")");
      } else {
        if (!(i >= 1 && std::holds_alternative<NonlinearLayer>(arch.layers[i - 1])))
          out.push_back(where +
                        ": the layer before a skip must be convolutional or fully connected "
                        "(nonlinear)");
        const PixelGrid& target = arch.grids[i - 1 - k];
        if (target != prev)
          out.push_back(where + ": skip target grid does not match current grid");
      }
    } else if (const auto* pl = std::get_if<PoolLayer>(&arch.layers[i])) {
      if (!(i >= 1 && std::holds_alternative<NonlinearLayer>(arch.layers[i - 1])))
        out.push_back(where + ": pool must be immediately preceded by a nonlinear "
                              "(convolutional) layer");
      try {
        arch.grids[i] = pool_partition(prev, pl->cell).coarse;
      } catch (const std::invalid_argument& e) {
        out.push_back(where + ": " + e.what());
      }
    } else if (std::holds_alternative<FlattenLayer>(arch.layers[i])) {
      ++flatten_count;
      const auto& fl = std::get<FlattenLayer>(arch.layers[i]);
      check_sigmas(fl.sigma_w, fl.sigma_b, i, out);
      arch.grids[i] = PixelGrid({1});
      if (i + 2 != n) out.push_back(where + ": flatten must be followed only by output");
    } else if (std::holds_alternative<OutputLayer>(arch.layers[i])) {
      ++output_count;
      if (i + 1 != n) out.push_back(where + ": output must be the last layer");
    }
  }

  if (flatten_count != 1) out.push_back("exactly one flatten layer is required");
  if (output_count != 1) out.push_back("exactly one output layer is required");
  if (!std::holds_alternative<InputConvLayer>(arch.layers[0]))
    out.push_back("layer 0: first layer must be input_conv");
  return out;
}

namespace {

Patch patch_from_json(const json& j) {
  if (j.contains("centered")) return Patch::centered(j.at("centered").get<std::vector<int>>());
  return Patch(j.at("patch").get<std::vector<std::vector<int>>>());
}

LayerSpec layer_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "input_conv") {
    InputConvLayer l;
    l.patch = patch_from_json(j);
    l.sigma_w = j.at("sigma_w").get<double>();
    l.sigma_b = j.at("sigma_b").get<double>();
    return l;
  }
  if (type == "nonlinear") {
    NonlinearLayer l;
    l.patch = patch_from_json(j);
    l.sigma_w = j.at("sigma_w").get<double>();
    l.sigma_b = j.at("sigma_b").get<double>();
    return l;
  }
  if (type == "skip") return SkipLayer{j.at("gap").get<int>()};
  if (type == "pool") return PoolLayer{j.at("cell").get<std::vector<int>>()};
  if (type == "flatten")
    return FlattenLayer{j.at("sigma_w").get<double>(), j.at("sigma_b").get<double>()};
  if (type == "output") return OutputLayer{};
  throw std::invalid_argument("unknown layer type '" + type + "'");
}

json layer_to_json(const LayerSpec& layer) {
  json j;
  j["type"] = layer_type_name(layer);
  if (const auto* in = std::get_if<InputConvLayer>(&layer)) {
    j["patch"] = in->patch.offsets;
    j["sigma_w"] = in->sigma_w;
    j["sigma_b"] = in->sigma_b;
  } else if (const auto* nl = std::get_if<NonlinearLayer>(&layer)) {
    j["patch"] = nl->patch.offsets;
    j["sigma_w"] = nl->sigma_w;
    j["sigma_b"] = nl->sigma_b;
  } else if (const auto* sk = std::get_if<SkipLayer>(&layer)) {
    j["gap"] = sk->gap;
  } else if (const auto* pl = std::get_if<PoolLayer>(&layer)) {
    j["cell"] = pl->cell;
  } else if (const auto* fl = std::get_if<FlattenLayer>(&layer)) {
    j["sigma_w"] = fl->sigma_w;
    j["sigma_b"] = fl->sigma_b;
  }
  return j;
}

}  // namespace

ArchSpec load_arch(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("architecture document is not valid JSON: ") +
                                e.what());
  }
  ArchSpec arch;
  try {
    arch.input_channels = doc.at("input_channels").get<int>();
    arch.input_grid = PixelGrid(doc.at("input_dims").get<std::vector<int>>());
    for (const auto& jl : doc.at("layers")) arch.layers.push_back(layer_from_json(jl));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("architecture schema violation: ") + e.what());
  }
  auto violations = validate_arch(arch);
  if (!violations.empty()) throw ArchValidationError(std::move(violations));
  return arch;
}

ArchSpec load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open architecture file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_arch(ss.str());
}

std::string arch_to_json(const ArchSpec& arch) {
  json doc;
  doc["input_channels"] = arch.input_channels;
  doc["input_dims"] = arch.input_grid.dims;
  doc["layers"] = json::array();
  for (const auto& l : arch.layers) doc["layers"].push_back(layer_to_json(l));
  return doc.dump(2);
}

std::vector<std::pair<int, PixelGrid>> layer_geometry(const ArchSpec& arch) {
  std::vector<std::pair<int, PixelGrid>> out;
  out.reserve(arch.layers.size());
  for (size_t i = 0; i < arch.layers.size(); ++i)
    out.emplace_back(static_cast<int>(i), arch.grids[i]);
  return out;
}

ArchSpec fc_arch(int channels, int hidden_layers, double sigma_w, double sigma_b) {
  if (hidden_layers < 1) throw std::invalid_argument("fc_arch needs at least one hidden layer");
  ArchSpec arch;
  arch.input_channels = channels;
  arch.input_grid = PixelGrid({1});
  Patch p(std::vector<std::vector<int>>{{0}});
  arch.layers.push_back(InputConvLayer{p, sigma_w, sigma_b});
  for (int i = 1; i < hidden_layers; ++i)
    arch.layers.push_back(NonlinearLayer{p, sigma_w, sigma_b});
  arch.layers.push_back(FlattenLayer{sigma_w, sigma_b});
  arch.layers.push_back(OutputLayer{});
  auto violations = validate_arch(arch);
  if (!violations.empty()) throw ArchValidationError(std::move(violations));
  return arch;
}

ArchSpec conv_arch(int channels, int side, bool pool, double sigma_w, double sigma_b) {
  ArchSpec arch;
  arch.input_channels = channels;
  arch.input_grid = PixelGrid({side, side});
  Patch p3 = Patch::centered({3, 3});
  arch.layers.push_back(InputConvLayer{p3, sigma_w, sigma_b});
  arch.layers.push_back(NonlinearLayer{p3, sigma_w, sigma_b});
  if (pool) arch.layers.push_back(PoolLayer{{2, 2}});
  arch.layers.push_back(FlattenLayer{sigma_w, sigma_b});
  arch.layers.push_back(OutputLayer{});
  auto violations = validate_arch(arch);
  if (!violations.empty()) throw ArchValidationError(std::move(violations));
  return arch;
}

ArchSpec skip_arch(int channels, int side, double sigma_w, double sigma_b) {
  ArchSpec arch;
  arch.input_channels = channels;
  arch.input_grid = PixelGrid({side, side});
  Patch p3 = Patch::centered({3, 3});
  arch.layers.push_back(InputConvLayer{p3, sigma_w, sigma_b});
  arch.layers.push_back(NonlinearLayer{p3, sigma_w, sigma_b});
  arch.layers.push_back(NonlinearLayer{p3, sigma_w, sigma_b});
  arch.layers.push_back(SkipLayer{1});
  arch.layers.push_back(FlattenLayer{sigma_w, sigma_b});
  arch.layers.push_back(OutputLayer{});
  auto violations = validate_arch(arch);
  if (!violations.empty()) throw ArchValidationError(std::move(violations));
  return arch;
}

}  // namespace nngpcert
