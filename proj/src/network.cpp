#include "stegnet/network.hpp"

#include <random>

#include "stegnet/parallel.hpp"
#include "stegnet/seed.hpp"

namespace stegnet {

std::string BlockInfo::name() const {
  return "layer" + std::to_string(layer) + (module == Module::conv ? ".conv" : ".fc") +
         (role == Role::weight ? ".weight" : ".bias");
}

template <typename T>
Network<T>::Network(NetSpec spec, Structure structure) : spec_(std::move(spec)), structure_(structure) {
  if (structure_ == Structure::classifier)
    validate(spec_);
  shapes_ = propagate_shapes(spec_);
  Shape in = input_shape();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& ls = spec_.layers[i];
    if (const auto* c = std::get_if<ConvSpec>(&ls)) {
      const ConvGeometry g{{in[1], in[2]}, {c->kernel, c->kernel}, c->stride, c->pad, c->mode};
      layers_.emplace_back(ConvLayer<T>(c->filters, in[0], g));
      blocks_.push_back({i, BlockInfo::Role::weight, BlockInfo::Module::conv});
      blocks_.push_back({i, BlockInfo::Role::bias, BlockInfo::Module::conv});
    } else if (const auto* f = std::get_if<FcSpec>(&ls)) {
      layers_.emplace_back(FcLayer<T>(in[0], f->out, f->bias));
      blocks_.push_back({i, BlockInfo::Role::weight, BlockInfo::Module::fc});
      if (f->bias) blocks_.push_back({i, BlockInfo::Role::bias, BlockInfo::Module::fc});
    } else {
      std::visit(
          [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (!std::is_same_v<S, ConvSpec> && !std::is_same_v<S, FcSpec>) layers_.emplace_back(s);
          },
          ls);
    }
    in = shapes_[i];
  }
}

template <typename T>
Network<T> Network<T>::initialized(NetSpec spec, std::uint64_t seed, double stddev, Structure structure) {
  Network net(std::move(spec), structure);
  Rng rng(derive_seed(seed, "init"));
  std::normal_distribution<double> normal(0.0, stddev);
  for (std::size_t i = 0; i < net.num_blocks(); ++i) {
    if (net.block_info(i).role != BlockInfo::Role::weight) continue;
    for (T& v : net.block(i).values()) v = static_cast<T>(normal(rng));
  }
  return net;
}

template <typename T>
BasicTensor<T>& Network<T>::block(std::size_t i) {
  const BlockInfo& b = blocks_.at(i);
  const bool weight = b.role == BlockInfo::Role::weight;
  if (auto* c = std::get_if<ConvLayer<T>>(&layers_[b.layer])) return weight ? c->kernels : c->biases;
  auto& f = std::get<FcLayer<T>>(layers_[b.layer]);
  return weight ? f.weights : f.biases;
}

template <typename T>
const BasicTensor<T>& Network<T>::block(std::size_t i) const {
  return const_cast<Network*>(this)->block(i);
}

template <typename T>
std::size_t Network<T>::param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) n += block(i).size();
  return n;
}

template <typename T>
std::vector<typename Network<T>::Batch> Network<T>::forward_trace(const Batch& inputs, std::size_t stop) const {
  stop = std::min(stop, layers_.size());
  const Shape in_shape = input_shape();
  for (const auto& x : inputs)
    if (x.shape() != in_shape)
      throw ShapeError("network expects input " + in_shape.str() + ", got " + x.shape().str());

  const std::size_t n = inputs.size();
  std::vector<Batch> trace;
  trace.reserve(stop + 1);
  trace.push_back(inputs);
  for (std::size_t l = 0; l < stop; ++l) {
    const Batch& x = trace.back();
    Batch y;
    try {
      if (const auto* fc = std::get_if<FcLayer<T>>(&layers_[l])) {
        y = fc_forward_batch(*fc, x);
      } else {
        y.resize(n);
        parallel_for(n, [&](std::size_t b) {
          y[b] = std::visit(
              [&](const auto& layer) -> BasicTensor<T> {
                using L = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<L, HighPassSpec>) return high_pass_forward(x[b]);
                else if constexpr (std::is_same_v<L, ConvLayer<T>>) return conv_forward(layer, x[b]);
                else if constexpr (std::is_same_v<L, PadSpec>) return pad_forward(layer, x[b]);
                else if constexpr (std::is_same_v<L, ActivationSpec>) return activation_forward(layer, x[b]);
                else if constexpr (std::is_same_v<L, PoolSpec>) return pool_forward(layer, x[b]);
                else if constexpr (std::is_same_v<L, LrnSpec>) return lrn_forward(layer, x[b]);
                else if constexpr (std::is_same_v<L, FlattenSpec>) return x[b].reshaped(Shape{x[b].size()});
                else if constexpr (std::is_same_v<L, SoftmaxSpec>) return softmax(x[b]);
                else throw ShapeError("unreachable layer kind");
              },
              layers_[l]);
        });
      }
    } catch (const NumericError& e) {
      throw NumericError("forward pass, layer " + std::to_string(l) + ": " + e.what());
    }
    trace.push_back(std::move(y));
  }
  return trace;
}

template <typename T>
typename Network<T>::Batch Network<T>::forward(const Batch& inputs, std::size_t stop) const {
  auto trace = forward_trace(inputs, stop);
  return std::move(trace.back());
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& input, std::size_t stop) const {
  return std::move(forward(Batch{input}, stop).front());
}

template <typename T>
std::vector<BasicTensor<T>> Network<T>::backward(const std::vector<Batch>& trace, const Batch& grad_top) const {
  const std::size_t depth = trace.size() - 1;
  if (depth != layers_.size()) throw ShapeError("backward needs a full forward trace");
  const std::size_t n = trace.front().size();
  if (grad_top.size() != n) throw ShapeError("backward: gradient batch size mismatch");

  std::vector<BasicTensor<T>> grads(blocks_.size());
  std::vector<std::size_t> first_block(layers_.size(), blocks_.size());
  for (std::size_t i = blocks_.size(); i-- > 0;) first_block[blocks_[i].layer] = i;
  std::size_t lowest = layers_.size();
  for (const auto& b : blocks_) lowest = std::min(lowest, b.layer);

  Batch g = grad_top;
  for (std::size_t l = layers_.size(); l-- > lowest;) {
    const Batch& x = trace[l];
    const Batch& y = trace[l + 1];
    const bool want_input = l > lowest;
    Batch gin;
    if (const auto* fc = std::get_if<FcLayer<T>>(&layers_[l])) {
      ParamGrads<T> pg;
      gin = fc_backward_batch(*fc, x, g, pg, want_input);
      grads[first_block[l]] = std::move(pg.weights);
      if (fc->has_bias()) grads[first_block[l] + 1] = std::move(pg.biases);
    } else if (const auto* conv = std::get_if<ConvLayer<T>>(&layers_[l])) {
      std::vector<ParamGrads<T>> per_sample(n);
      if (want_input) gin.resize(n);
      parallel_for(n, [&](std::size_t b) {
        auto gi = conv_backward(*conv, x[b], g[b], per_sample[b], want_input);
        if (gi) gin[b] = std::move(*gi);
      });
      ParamGrads<T> total{BasicTensor<T>(conv->kernels.shape()), BasicTensor<T>(conv->biases.shape())};
      for (const auto& ps : per_sample) {
        for (std::size_t i = 0; i < total.weights.size(); ++i) total.weights.data()[i] += ps.weights.data()[i];
        for (std::size_t i = 0; i < total.biases.size(); ++i) total.biases.data()[i] += ps.biases.data()[i];
      }
      grads[first_block[l]] = std::move(total.weights);
      grads[first_block[l] + 1] = std::move(total.biases);
    } else {
      gin.resize(n);
      parallel_for(n, [&](std::size_t b) {
        gin[b] = std::visit(
            [&](const auto& layer) -> BasicTensor<T> {
              using L = std::decay_t<decltype(layer)>;
              if constexpr (std::is_same_v<L, HighPassSpec>) return high_pass_backward(x[b], g[b]);
              else if constexpr (std::is_same_v<L, PadSpec>) return pad_backward(layer, g[b]);
              else if constexpr (std::is_same_v<L, ActivationSpec>) return activation_backward(layer, x[b], g[b]);
              else if constexpr (std::is_same_v<L, PoolSpec>) return pool_backward(layer, x[b], g[b]);
              else if constexpr (std::is_same_v<L, LrnSpec>) return lrn_backward(layer, x[b], g[b]);
              else if constexpr (std::is_same_v<L, FlattenSpec>) return g[b].reshaped(x[b].shape());
              else if constexpr (std::is_same_v<L, SoftmaxSpec>) return softmax_backward(y[b], g[b]);
              else throw ShapeError("unreachable layer kind");
            },
            layers_[l]);
      });
    }
    for (std::size_t i = first_block[l]; i < blocks_.size() && blocks_[i].layer == l; ++i) {
      try {
        grads[i].require_finite(blocks_[i].name());
      } catch (const NumericError& e) {
        throw NumericError("backward pass, layer " + std::to_string(l) + ": " + e.what());
      }
    }
    g = std::move(gin);
  }
  return grads;
}

template class Network<float>;
template class Network<double>;

}  // namespace stegnet
