#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "stegnet/conv.hpp"
#include "stegnet/tensor.hpp"

namespace stegnet {

// ---------------------------------------------------------------------------
// Layer hyperparameters. These are plain values shared by NetSpec and the
// runtime layers.

/// Fixed 5x5 high-pass pre-filter applied to raw pixels (no parameters).
struct HighPassSpec {
  friend bool operator==(const HighPassSpec&, const HighPassSpec&) = default;
};

struct ConvSpec {
  std::size_t filters = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  SizeMode mode = SizeMode::floor;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Explicit zero border around every map.
struct PadSpec {
  std::size_t amount = 0;
  friend bool operator==(const PadSpec&, const PadSpec&) = default;
};

enum class ActivationKind { relu, gaussian, absolute, sine, identity };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::relu;
  double sigma = 1.0;  // gaussian only
  /// Gaussian only: evaluate exp(-x^2) / sigma^2 instead of exp(-x^2 / sigma^2).
  bool literal_gaussian = false;
  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

enum class PoolKind { average, maximum };

/// Pooling window sweep. Windows may hang over the border when pad > 0 or
/// mode is ceil; only in-bounds elements take part.
struct PoolSpec {
  PoolKind kind = PoolKind::average;
  std::size_t window = 2;
  std::size_t stride = 2;
  std::size_t pad = 0;
  SizeMode mode = SizeMode::floor;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

/// Across-map local response normalization.
struct LrnSpec {
  double alpha = 0.001;
  double beta = 0.75;
  std::size_t size = 9;
  friend bool operator==(const LrnSpec&, const LrnSpec&) = default;
};

struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};

struct FcSpec {
  std::size_t out = 1;
  bool bias = true;
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};

struct SoftmaxSpec {
  friend bool operator==(const SoftmaxSpec&, const SoftmaxSpec&) = default;
};

void validate(const ActivationSpec& spec);
void validate(const PoolSpec& spec);
void validate(const LrnSpec& spec);

// ---------------------------------------------------------------------------
// Parameterized layers.

/// K filters over K_prev input maps, one bias per output map.
/// kernels: [K, K_prev, fH, fW], biases: [K].
template <typename T>
struct ConvLayer {
  ConvGeometry geom;
  BasicTensor<T> kernels;
  BasicTensor<T> biases;

  ConvLayer() = default;
  ConvLayer(std::size_t filters, std::size_t input_maps, const ConvGeometry& geometry);

  std::size_t filters() const { return kernels.shape()[0]; }
  std::size_t input_maps() const { return kernels.shape()[1]; }
  std::size_t param_count() const { return kernels.size() + biases.size(); }
};

/// weights: [out, in], biases: [out] or empty when the layer has none.
template <typename T>
struct FcLayer {
  BasicTensor<T> weights;
  BasicTensor<T> biases;

  FcLayer() = default;
  FcLayer(std::size_t in, std::size_t out, bool bias);

  std::size_t in() const { return weights.shape()[1]; }
  std::size_t out() const { return weights.shape()[0]; }
  bool has_bias() const { return !biases.empty(); }
  std::size_t param_count() const { return weights.size() + biases.size(); }
};

/// Gradients of a layer's parameters, shaped like the parameters.
template <typename T>
struct ParamGrads {
  BasicTensor<T> weights;
  BasicTensor<T> biases;
};

// ---------------------------------------------------------------------------
// Forward and backward passes. Backward functions take the forward input
// (and output where cheaper) plus the upstream gradient. Parameter gradients
// are accumulated (+=) into `grads`; the input gradient is returned, or
// skipped when `want_input_grad` is false.

/// The 5x5 high-pass kernel, scaled by 1/12.
template <typename T>
BasicTensor<T> high_pass_kernel();

/// Valid cross-correlation of every map with the high-pass kernel.
template <typename T>
BasicTensor<T> high_pass_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> high_pass_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> conv_forward(const ConvLayer<T>& layer, const BasicTensor<T>& input);
template <typename T>
std::optional<BasicTensor<T>> conv_backward(const ConvLayer<T>& layer, const BasicTensor<T>& input,
                                            const BasicTensor<T>& grad_out, ParamGrads<T>& grads,
                                            bool want_input_grad = true);

template <typename T>
BasicTensor<T> pad_forward(const PadSpec& spec, const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> pad_backward(const PadSpec& spec, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> activation_forward(const ActivationSpec& spec, const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> activation_backward(const ActivationSpec& spec, const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_out);

Extent2 pool_output(const PoolSpec& spec, Extent2 input);

template <typename T>
BasicTensor<T> pool_forward(const PoolSpec& spec, const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> pool_backward(const PoolSpec& spec, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> lrn_forward(const LrnSpec& spec, const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> lrn_backward(const LrnSpec& spec, const BasicTensor<T>& input,
                            const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> fc_forward(const FcLayer<T>& layer, const BasicTensor<T>& x);
template <typename T>
std::optional<BasicTensor<T>> fc_backward(const FcLayer<T>& layer, const BasicTensor<T>& x,
                                          const BasicTensor<T>& grad_out, ParamGrads<T>& grads,
                                          bool want_input_grad = true);

/// Batched fc passes over rank-1 samples. Every output element accumulates
/// in the same order as fc_forward/fc_backward applied sample by sample
/// (inputs ascending, then samples ascending for parameter gradients), so
/// the results are bit-identical to the single-sample path.
template <typename T>
std::vector<BasicTensor<T>> fc_forward_batch(const FcLayer<T>& layer,
                                             const std::vector<BasicTensor<T>>& xs);
template <typename T>
std::vector<BasicTensor<T>> fc_backward_batch(const FcLayer<T>& layer,
                                              const std::vector<BasicTensor<T>>& xs,
                                              const std::vector<BasicTensor<T>>& grad_outs,
                                              ParamGrads<T>& grads, bool want_input_grad = true);

/// exp(x_i - max x) / sum_j exp(x_j - max x) over a rank-1 tensor.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

}  // namespace stegnet
