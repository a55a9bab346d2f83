#include <doctest.h>

#include "nngpcert/arch.hpp"

using namespace nngpcert;

namespace {

std::string fc_doc() {
  return R"({
    "input_channels": 8,
    "input_dims": [1],
    "layers": [
      {"type": "input_conv", "patch": [[0]], "sigma_w": 1.0, "sigma_b": 0.1},
      {"type": "nonlinear", "patch": [[0]], "sigma_w": 1.4, "sigma_b": 0.1},
      {"type": "nonlinear", "patch": [[0]], "sigma_w": 1.4, "sigma_b": 0.1},
      {"type": "flatten", "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "output"}
    ]
  })";
}

bool mentions(const ArchValidationError& e, const std::string& needle) {
  for (const auto& v : e.violations())
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("fully connected document loads with all grids of size 1") {
  ArchSpec arch = load_arch(fc_doc());
  CHECK(arch.input_channels == 8);
  CHECK(arch.input_grid.size() == 1);
  for (const auto& [idx, grid] : layer_geometry(arch)) CHECK(grid.size() == 1);
  CHECK(arch.input_dim() == 8);
}

TEST_CASE("pool directly after pool names the preceded-by-convolution rule") {
  const std::string doc = R"({
    "input_channels": 3,
    "input_dims": [4, 4],
    "layers": [
      {"type": "input_conv", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "nonlinear", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "pool", "cell": [2, 2]},
      {"type": "pool", "cell": [2, 2]},
      {"type": "flatten", "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "output"}
    ]
  })";
  try {
    load_arch(doc);
    FAIL("expected validation error");
  } catch (const ArchValidationError& e) {
    CHECK(mentions(e, "pool must be immediately preceded by a nonlinear"));
  }
}

TEST_CASE("skip with gap k = l-1 is rejected") {
  // skip as layer 3 (l = 2): the allowed set {1..l-2} is empty
  const std::string doc = R"({
    "input_channels": 3,
    "input_dims": [4, 4],
    "layers": [
      {"type": "input_conv", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "nonlinear", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "skip", "gap": 1},
      {"type": "flatten", "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "output"}
    ]
  })";
  try {
    load_arch(doc);
    FAIL("expected validation error");
  } catch (const ArchValidationError& e) {
    CHECK(mentions(e, "skip gap k"));
  }
}

TEST_CASE("asymmetric patch is rejected by name") {
  const std::string doc = R"({
    "input_channels": 1,
    "input_dims": [4],
    "layers": [
      {"type": "input_conv", "patch": [[0], [1]], "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "flatten", "sigma_w": 1.0, "sigma_b": 0.0},
      {"type": "output"}
    ]
  })";
  try {
    load_arch(doc);
    FAIL("expected validation error");
  } catch (const ArchValidationError& e) {
    CHECK(mentions(e, "symmetric under negation"));
  }
}

TEST_CASE("layer geometry") {
  SUBCASE("8x8 input with one 2x2 pool before flatten has 16 output pixels") {
    ArchSpec arch = conv_arch(3, 8, true, 1.0, 0.1);
    CHECK(arch.grid_before_flatten().size() == 16);
    auto geom = layer_geometry(arch);
    CHECK(geom.back().second.size() == 1);  // flattened
  }
  SUBCASE("all fully connected has every grid of size 1") {
    ArchSpec arch = fc_arch(8, 3, 1.0, 0.0);
    for (const auto& [idx, grid] : layer_geometry(arch)) CHECK(grid.size() == 1);
  }
  SUBCASE("pool factor 3 on a 4x4 grid fails") {
    const std::string doc = R"({
      "input_channels": 1,
      "input_dims": [4, 4],
      "layers": [
        {"type": "input_conv", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
        {"type": "nonlinear", "centered": [3, 3], "sigma_w": 1.0, "sigma_b": 0.0},
        {"type": "pool", "cell": [3, 3]},
        {"type": "flatten", "sigma_w": 1.0, "sigma_b": 0.0},
        {"type": "output"}
      ]
    })";
    try {
      load_arch(doc);
      FAIL("expected validation error");
    } catch (const ArchValidationError& e) {
      CHECK(mentions(e, "does not divide"));
    }
  }
}

TEST_CASE("serialization round trip is identity") {
  ArchSpec a1 = skip_arch(3, 4, 1.2, 0.05);
  ArchSpec a2 = load_arch(arch_to_json(a1));
  CHECK(a1 == a2);

  ArchSpec b1 = load_arch(fc_doc());
  ArchSpec b2 = load_arch(arch_to_json(b1));
  CHECK(b1 == b2);
}

TEST_CASE("flatten pixel count divides the input pixel count") {
  for (const ArchSpec& arch :
       {fc_arch(8, 3, 1.0, 0.0), conv_arch(3, 8, true, 1.0, 0.1), conv_arch(3, 4, false, 1.0, 0.1),
        skip_arch(3, 4, 1.0, 0.1)}) {
    CHECK(arch.input_grid.size() % arch.grid_before_flatten().size() == 0);
  }
}

TEST_CASE("patch symmetry holds for every stored patch") {
  for (const ArchSpec& arch : {conv_arch(3, 8, true, 1.0, 0.1), skip_arch(3, 4, 1.0, 0.1)}) {
    for (const auto& layer : arch.layers) {
      if (const auto* in = std::get_if<InputConvLayer>(&layer)) CHECK(in->patch.symmetric());
      if (const auto* nl = std::get_if<NonlinearLayer>(&layer)) CHECK(nl->patch.symmetric());
    }
  }
}

TEST_CASE("malformed schema names the field") {
  CHECK_THROWS_AS(load_arch("{\"input_dims\": [1]}"), std::invalid_argument);
  CHECK_THROWS_AS(load_arch("not json"), std::invalid_argument);
}

TEST_CASE("torus shift wraps periodically") {
  PixelGrid g({4, 4});
  CHECK(g.shift(0, {-1, -1}) == g.flatten({3, 3}));
  CHECK(g.shift(g.flatten({3, 3}), {1, 1}) == 0);
  CHECK(g.size() == 16);
}
