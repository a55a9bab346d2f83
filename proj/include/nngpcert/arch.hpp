#pragma once

// Architecture descriptions: an ordered list of layer records over a periodic
// pixel grid, validated against the structural rules the kernel recursion
// relies on. Instances are immutable after loading and safe to share across
// threads.

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nngpcert/torus.hpp"

namespace nngpcert {

struct InputConvLayer {
  Patch patch;
  double sigma_w = 1.0;
  double sigma_b = 0.0;
  bool operator==(const InputConvLayer&) const = default;
};

// Convolution with ReLU on its input; fully connected when grid and patch
// have size 1.
struct NonlinearLayer {
  Patch patch;
  double sigma_w = 1.0;
  double sigma_b = 0.0;
  bool operator==(const NonlinearLayer&) const = default;
};

struct SkipLayer {
  int gap = 1;  // adds the output of the layer `gap` positions before the previous one
  bool operator==(const SkipLayer&) const = default;
};

struct PoolLayer {
  std::vector<int> cell;  // per-dimension cell factors
  bool operator==(const PoolLayer&) const = default;
};

// Flatten plus the dense read-out applied to the ReLU of its input.
struct FlattenLayer {
  double sigma_w = 1.0;
  double sigma_b = 0.0;
  bool operator==(const FlattenLayer&) const = default;
};

struct OutputLayer {
  bool operator==(const OutputLayer&) const = default;
};

using LayerSpec =
    std::variant<InputConvLayer, NonlinearLayer, SkipLayer, PoolLayer, FlattenLayer, OutputLayer>;

const char* layer_type_name(const LayerSpec& layer);

struct ArchSpec {
  int input_channels = 1;
  PixelGrid input_grid;
  std::vector<LayerSpec> layers;

  // Derived on load: grids[i] is the pixel grid of layers[i]'s output.
  std::vector<PixelGrid> grids;

  int input_dim() const { return input_channels * input_grid.size(); }

  // Index of the flatten layer (always present in a valid spec).
  int flatten_index() const;

  // Grid of the layer immediately before the flattening.
  const PixelGrid& grid_before_flatten() const;

  bool operator==(const ArchSpec& o) const {
    return input_channels == o.input_channels && input_grid == o.input_grid && layers == o.layers;
  }
};

class ArchValidationError : public std::runtime_error {
 public:
  explicit ArchValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Structural validation; returns one message per broken rule (empty if valid).
// Fills `arch.grids` as a side effect when geometry is derivable.
std::vector<std::string> validate_arch(ArchSpec& arch);

// Parse + validate a schema document. Throws ArchValidationError (rule
// violations, all collected) or std::invalid_argument (malformed document).
ArchSpec load_arch(const std::string& json_text);
ArchSpec load_arch_file(const std::string& path);

std::string arch_to_json(const ArchSpec& arch);

// (layer index, output grid) for every layer; requires a validated arch.
std::vector<std::pair<int, PixelGrid>> layer_geometry(const ArchSpec& arch);

// ---- canned architectures used by experiments and tests ----

// input -> (hidden_layers-1) fully connected nonlinear layers -> flatten -> output,
// all widths jointly Gaussian; `channels` is the input dimension.
ArchSpec fc_arch(int channels, int hidden_layers, double sigma_w, double sigma_b);

// 2D convolutional arch on `side` x `side` pixels with centered 3x3 patches:
// input conv, one nonlinear conv, optional 2x2 pooling, flatten, output.
ArchSpec conv_arch(int channels, int side, bool pool, double sigma_w, double sigma_b);

// Same but with a skipped connection after two nonlinear conv layers.
ArchSpec skip_arch(int channels, int side, double sigma_w, double sigma_b);

}  // namespace nngpcert
