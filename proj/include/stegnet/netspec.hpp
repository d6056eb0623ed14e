#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stegnet/layers.hpp"

namespace stegnet {

using LayerSpec = std::variant<HighPassSpec, ConvSpec, PadSpec, ActivationSpec, PoolSpec, LrnSpec,
                               FlattenSpec, FcSpec, SoftmaxSpec>;

/// Short keyword used for a layer in architecture files ("conv", "fc", ...).
std::string_view layer_kind(const LayerSpec& layer);

/// Input shape of a network: maps x rows x cols of one sample.
struct InputSpec {
  std::size_t maps = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Declarative description of a chain network.
struct NetSpec {
  std::string name;
  /// Name of the data source a trained model last saw; empty if untrained.
  std::string source;
  InputSpec input;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Output shape of every layer, in order. Throws ShapeError (naming the
/// layer index) if any layer does not fit its input. Checks shapes only;
/// see validate() for the full structural rules.
std::vector<Shape> propagate_shapes(const NetSpec& spec);

/// Shape check plus the structural rules of a complete classifier: exactly
/// one flatten separating spatial and vector layers, and exactly one
/// softmax, last, fed by a 2-vector.
void validate(const NetSpec& spec);

/// The first `count` layers, for use as a feature extractor. The result
/// passes propagate_shapes() but not validate().
NetSpec prefix(const NetSpec& spec, std::size_t count);

/// Index of the flatten layer, or layers.size() if absent.
std::size_t flatten_index(const NetSpec& spec);

// ---------------------------------------------------------------------------
// Presets.

struct PresetOptions {
  /// Side of the square input image: 256 (full scale) or 32 (desk scale).
  std::size_t input_size = 256;
  /// Filters per conv layer; empty keeps the preset's own counts.
  std::vector<std::size_t> conv_filters;
  /// Hidden fc widths; empty keeps the preset's own widths.
  std::vector<std::size_t> fc_hidden;
};

/// "pibre-cnn", "qian-cnn" or "pibre-fnn". Throws ArgumentError for an
/// unknown name or input size.
NetSpec preset(std::string_view name, const PresetOptions& options = {});
std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Counting.

struct LayerCount {
  std::size_t index = 0;
  std::string kind;
  Shape output;
  std::uint64_t params = 0;
  /// Literal K * |I_prev| * (1 + |F|) for conv layers, 0 otherwise.
  std::uint64_t ops = 0;
};

struct ParamCount {
  std::vector<LayerCount> layers;
  std::uint64_t conv_total = 0;
  std::uint64_t fc_total = 0;
  std::uint64_t total = 0;
};

/// conv: K * (1 + K_prev*fH*fW); fc: out*in (+ out if biased); others 0.
ParamCount count_params(const NetSpec& spec);

struct OpCount {
  /// Per conv layer: K * |I_prev| * (1 + |F|), |I_prev| the input map area.
  std::vector<LayerCount> layers;
  std::uint64_t conv_total = 0;
  /// Coarse whole-stack estimate L * K1 * |I_first| * |F_second|: number of
  /// conv layers, filters of the first conv layer, area of the first conv
  /// input, weights per filter of the second conv layer (first if single).
  std::uint64_t coarse_estimate = 0;
};

/// Multiply/accumulate estimates for the conv part. Both figures are upper
/// bounds: borders and the activation, pooling and normalization costs are
/// not modeled.
OpCount count_ops(const NetSpec& spec);

// ---------------------------------------------------------------------------
// Architecture text format: one `kind key=value ...` line per layer, plus
// `name <text>`, `source <text>` and `input maps=M rows=R cols=C` lines.
// `#` starts a comment.

std::string to_text(const NetSpec& spec);
NetSpec parse_netspec(std::string_view text);
NetSpec load_netspec(const std::string& path);

}  // namespace stegnet
