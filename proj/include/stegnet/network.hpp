#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "stegnet/layers.hpp"
#include "stegnet/netspec.hpp"

namespace stegnet {

/// Whether a Network must satisfy validate() (a complete classifier) or
/// only propagate_shapes() (e.g. a truncated feature extractor).
enum class Structure { classifier, any };

/// Identity of one learnable parameter array.
struct BlockInfo {
  enum class Role { weight, bias };
  enum class Module { conv, fc };
  std::size_t layer = 0;
  Role role = Role::weight;
  Module module = Module::conv;

  std::string name() const;
};

/// Runtime form of a NetSpec: the layer chain plus its parameters.
///
/// Samples are processed as batches (one tensor per sample). Per-sample
/// layers may run concurrently across samples; everything that sums over
/// samples does so in sample order, so results do not depend on the
/// worker count.
template <typename T>
class Network {
 public:
  using Batch = std::vector<BasicTensor<T>>;
  static constexpr std::size_t all_layers = std::numeric_limits<std::size_t>::max();

  /// All parameters zero.
  explicit Network(NetSpec spec, Structure structure = Structure::classifier);

  /// Weights drawn from N(0, stddev^2), biases zero.
  static Network initialized(NetSpec spec, std::uint64_t seed, double stddev = 0.01,
                             Structure structure = Structure::classifier);

  const NetSpec& spec() const noexcept { return spec_; }
  void set_source(std::string source) { spec_.source = std::move(source); }
  Structure structure() const noexcept { return structure_; }

  /// Output shape of layer i.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  Shape input_shape() const { return {spec_.input.maps, spec_.input.rows, spec_.input.cols}; }
  std::size_t num_layers() const noexcept { return layers_.size(); }

  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  const BlockInfo& block_info(std::size_t i) const { return blocks_.at(i); }
  BasicTensor<T>& block(std::size_t i);
  const BasicTensor<T>& block(std::size_t i) const;
  std::size_t param_count() const;

  /// trace[0] = inputs, trace[l + 1] = output of layer l, for the first
  /// `stop` layers.
  std::vector<Batch> forward_trace(const Batch& inputs, std::size_t stop = all_layers) const;

  /// Output of layer `stop - 1` (the last layer by default).
  Batch forward(const Batch& inputs, std::size_t stop = all_layers) const;
  BasicTensor<T> forward(const BasicTensor<T>& input, std::size_t stop = all_layers) const;

  /// Parameter gradients summed over the batch, one tensor per block.
  /// `grad_top` holds d(loss)/d(last layer output) for each sample.
  std::vector<BasicTensor<T>> backward(const std::vector<Batch>& trace, const Batch& grad_top) const;

  template <typename U>
  Network<U> cast() const {
    Network<U> out(spec_, structure_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) out.block(i) = block(i).template cast<U>();
    return out;
  }

 private:
  using LayerState = std::variant<HighPassSpec, ConvLayer<T>, PadSpec, ActivationSpec, PoolSpec,
                                  LrnSpec, FlattenSpec, FcLayer<T>, SoftmaxSpec>;

  NetSpec spec_;
  Structure structure_;
  std::vector<Shape> shapes_;
  std::vector<LayerState> layers_;
  std::vector<BlockInfo> blocks_;
};

using Model = Network<float>;

extern template class Network<float>;
extern template class Network<double>;

}  // namespace stegnet
