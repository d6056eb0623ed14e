#include "stegnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stegnet {

void validate(const ActivationSpec& spec) {
  if (spec.kind == ActivationKind::gaussian && !(spec.sigma > 0))
    throw ArgumentError("gaussian activation needs sigma > 0");
}

void validate(const PoolSpec& spec) {
  if (spec.window == 0 || spec.stride == 0) throw ArgumentError("pool window and stride must be positive");
  if (spec.stride > spec.window) throw ArgumentError("pool stride must not exceed the window");
  if (spec.pad >= spec.window) throw ArgumentError("pool pad must be smaller than the window");
}

void validate(const LrnSpec& spec) {
  if (!(spec.alpha >= 0)) throw ArgumentError("lrn alpha must be >= 0");
  if (!(spec.beta > 0)) throw ArgumentError("lrn beta must be > 0");
  if (spec.size == 0) throw ArgumentError("lrn size must be positive");
}

namespace {

void require_spatial(const Shape& s, const char* who) {
  if (s.rank() != 3) throw ShapeError(std::string(who) + " expects [maps, H, W], got " + s.str());
}

void require_same(const Shape& a, const Shape& b, const char* who) {
  if (a != b) throw ShapeError(std::string(who) + ": gradient " + b.str() + " vs forward " + a.str());
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
ConvLayer<T>::ConvLayer(std::size_t filters, std::size_t input_maps, const ConvGeometry& geometry)
    : geom(geometry),
      kernels(Shape{filters, input_maps, geometry.kernel.rows, geometry.kernel.cols}),
      biases(Shape{filters}) {
  if (filters == 0 || input_maps == 0) throw ShapeError("conv layer needs filters and input maps");
  geom.output();
}

template <typename T>
FcLayer<T>::FcLayer(std::size_t in, std::size_t out, bool bias) : weights(Shape{out, in}) {
  if (in == 0 || out == 0) throw ShapeError("fc layer needs positive extents");
  if (bias) biases = BasicTensor<T>(Shape{out});
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> high_pass_kernel() {
  static constexpr int coeffs[25] = {-1, 2,  -2, 2,  -1,  //
                                     2,  -6, 8,  -6, 2,   //
                                     -2, 8,  -12, 8, -2,  //
                                     2,  -6, 8,  -6, 2,   //
                                     -1, 2,  -2, 2,  -1};
  std::vector<T> v(25);
  for (int i = 0; i < 25; ++i) v[i] = static_cast<T>(coeffs[i]) / T(12);
  return BasicTensor<T>(Shape{5, 5}, std::move(v));
}

template <typename T>
BasicTensor<T> high_pass_forward(const BasicTensor<T>& input) {
  require_spatial(input.shape(), "high-pass filter");
  const std::size_t maps = input.shape()[0];
  const std::size_t rows = input.shape()[1];
  const std::size_t cols = input.shape()[2];
  if (rows < 5 || cols < 5) throw ShapeError("high-pass filter needs at least 5x5, got " + input.shape().str());
  const BasicTensor<T> kernel = high_pass_kernel<T>();
  const std::size_t orows = rows - 4;
  const std::size_t ocols = cols - 4;
  BasicTensor<T> out(Shape{maps, orows, ocols});
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t y = 0; y < orows; ++y) {
      for (std::size_t x = 0; x < ocols; ++x) {
        T acc{};
        for (std::size_t kr = 0; kr < 5; ++kr)
          for (std::size_t kc = 0; kc < 5; ++kc) acc += kernel[kr * 5 + kc] * input.at(m, y + kr, x + kc);
        out.at(m, y, x) = acc;
      }
    }
  }
  out.require_finite("high-pass output");
  return out;
}

template <typename T>
BasicTensor<T> high_pass_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  require_spatial(input.shape(), "high-pass filter");
  const BasicTensor<T> kernel = high_pass_kernel<T>();
  const std::size_t maps = input.shape()[0];
  require_same(Shape{maps, input.shape()[1] - 4, input.shape()[2] - 4}, grad_out.shape(), "high-pass backward");
  BasicTensor<T> grad_in(input.shape());
  for (std::size_t m = 0; m < maps; ++m)
    for (std::size_t y = 0; y < grad_out.shape()[1]; ++y)
      for (std::size_t x = 0; x < grad_out.shape()[2]; ++x) {
        const T g = grad_out.at(m, y, x);
        for (std::size_t kr = 0; kr < 5; ++kr)
          for (std::size_t kc = 0; kc < 5; ++kc) grad_in.at(m, y + kr, x + kc) += g * kernel[kr * 5 + kc];
      }
  return grad_in;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> conv_forward(const ConvLayer<T>& layer, const BasicTensor<T>& input) {
  require_spatial(input.shape(), "conv layer");
  const ConvGeometry& g = layer.geom;
  if (input.shape()[0] != layer.input_maps() || Extent2{input.shape()[1], input.shape()[2]} != g.input)
    throw ShapeError("conv layer expects " + std::to_string(layer.input_maps()) + " maps of " +
                     std::to_string(g.input.rows) + "x" + std::to_string(g.input.cols) + ", got " +
                     input.shape().str());
  const Extent2 o = g.output();
  const std::size_t filters = layer.filters();
  const std::size_t per_filter = layer.input_maps() * g.kernel.rows * g.kernel.cols;
  const BasicTensor<T> swept = detail::sweep_input(input, g);
  BasicTensor<T> out(Shape{filters, o.rows, o.cols});
  for (std::size_t k = 0; k < filters; ++k) {
    T* plane = out.map(k).data();
    detail::correlate_accumulate(swept, layer.kernels.data() + k * per_filter, g, plane);
    const T b = layer.biases[k];
    for (std::size_t j = 0; j < o.rows * o.cols; ++j) plane[j] += b;
  }
  out.require_finite("conv layer output");
  return out;
}

template <typename T>
std::optional<BasicTensor<T>> conv_backward(const ConvLayer<T>& layer, const BasicTensor<T>& input,
                                            const BasicTensor<T>& grad_out, ParamGrads<T>& grads,
                                            bool want_input_grad) {
  const ConvGeometry& g = layer.geom;
  const Extent2 o = g.output();
  const std::size_t filters = layer.filters();
  require_same(Shape{filters, o.rows, o.cols}, grad_out.shape(), "conv backward");
  if (grads.weights.shape() != layer.kernels.shape()) grads.weights = BasicTensor<T>(layer.kernels.shape());
  if (grads.biases.shape() != layer.biases.shape()) grads.biases = BasicTensor<T>(layer.biases.shape());

  const std::size_t per_filter = layer.input_maps() * g.kernel.rows * g.kernel.cols;
  const BasicTensor<T> swept = detail::sweep_input(input, g);
  for (std::size_t k = 0; k < filters; ++k) {
    const auto gk = grad_out.map(k);
    T bsum{};
    for (const T v : gk) bsum += v;
    grads.biases[k] += bsum;
    detail::kernel_grad_accumulate(swept, gk.data(), g, grads.weights.data() + k * per_filter);
  }
  if (!want_input_grad) return std::nullopt;

  BasicTensor<T> swept_grad(swept.shape());
  for (std::size_t k = 0; k < filters; ++k)
    detail::input_grad_accumulate(layer.kernels.data() + k * per_filter, grad_out.map(k).data(), g, swept_grad);
  return crop(swept_grad, g.pad, g.pad, g.input.rows, g.input.cols);
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> pad_forward(const PadSpec& spec, const BasicTensor<T>& input) {
  require_spatial(input.shape(), "pad layer");
  return pad_zero(input, spec.amount);
}

template <typename T>
BasicTensor<T> pad_backward(const PadSpec& spec, const BasicTensor<T>& grad_out) {
  require_spatial(grad_out.shape(), "pad backward");
  const std::size_t a = spec.amount;
  if (grad_out.shape()[1] < 2 * a || grad_out.shape()[2] < 2 * a) throw ShapeError("pad backward: gradient too small");
  return crop(grad_out, a, a, grad_out.shape()[1] - 2 * a, grad_out.shape()[2] - 2 * a);
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> activation_forward(const ActivationSpec& spec, const BasicTensor<T>& x) {
  validate(spec);
  BasicTensor<T> y = x;
  const T s2 = static_cast<T>(spec.sigma * spec.sigma);
  for (T& v : y.values()) {
    switch (spec.kind) {
      case ActivationKind::relu: v = v > T(0) ? v : T(0); break;
      case ActivationKind::gaussian:
        v = spec.literal_gaussian ? std::exp(-v * v) / s2 : std::exp(-v * v / s2);
        break;
      case ActivationKind::absolute: v = std::abs(v); break;
      case ActivationKind::sine: v = std::sin(v); break;
      case ActivationKind::identity: break;
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> activation_backward(const ActivationSpec& spec, const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_out) {
  require_same(x.shape(), grad_out.shape(), "activation backward");
  validate(spec);
  BasicTensor<T> g = grad_out;
  const T s2 = static_cast<T>(spec.sigma * spec.sigma);
  auto xs = x.values();
  auto gs = g.values();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const T v = xs[i];
    T d;
    switch (spec.kind) {
      case ActivationKind::relu: d = v > T(0) ? T(1) : T(0); break;
      case ActivationKind::gaussian:
        d = spec.literal_gaussian ? T(-2) * v * std::exp(-v * v) / s2 : T(-2) * v / s2 * std::exp(-v * v / s2);
        break;
      case ActivationKind::absolute: d = v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); break;
      case ActivationKind::sine: d = std::cos(v); break;
      case ActivationKind::identity: d = T(1); break;
    }
    gs[i] *= d;
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

struct Window {
  std::size_t begin;
  std::size_t end;  // exclusive, clipped to the input
};

Window pool_window(std::size_t index, const PoolSpec& spec, std::size_t n) {
  const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(index * spec.stride) - static_cast<std::ptrdiff_t>(spec.pad);
  const std::ptrdiff_t stop = start + static_cast<std::ptrdiff_t>(spec.window);
  return {static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0)),
          static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(stop, 0, static_cast<std::ptrdiff_t>(n)))};
}

}  // namespace

Extent2 pool_output(const PoolSpec& spec, Extent2 input) {
  validate(spec);
  const Extent2 o{out_size(input.rows, spec.window, spec.stride, spec.pad, spec.mode),
                  out_size(input.cols, spec.window, spec.stride, spec.pad, spec.mode)};
  // Every window must cover at least one real element.
  const Window wr = pool_window(o.rows - 1, spec, input.rows);
  const Window wc = pool_window(o.cols - 1, spec, input.cols);
  if (wr.begin >= wr.end || wc.begin >= wc.end)
    throw ShapeError("pooling window falls entirely outside a " + std::to_string(input.rows) + "x" +
                     std::to_string(input.cols) + " map");
  return o;
}

template <typename T>
BasicTensor<T> pool_forward(const PoolSpec& spec, const BasicTensor<T>& input) {
  require_spatial(input.shape(), "pool layer");
  const std::size_t maps = input.shape()[0];
  const Extent2 in{input.shape()[1], input.shape()[2]};
  const Extent2 o = pool_output(spec, in);
  BasicTensor<T> out(Shape{maps, o.rows, o.cols});
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t y = 0; y < o.rows; ++y) {
      const Window wr = pool_window(y, spec, in.rows);
      for (std::size_t x = 0; x < o.cols; ++x) {
        const Window wc = pool_window(x, spec, in.cols);
        T acc = spec.kind == PoolKind::average ? T(0) : -std::numeric_limits<T>::infinity();
        for (std::size_t r = wr.begin; r < wr.end; ++r)
          for (std::size_t c = wc.begin; c < wc.end; ++c) {
            const T v = input.at(m, r, c);
            if (spec.kind == PoolKind::average)
              acc += v;
            else if (v > acc)
              acc = v;
          }
        if (spec.kind == PoolKind::average) acc /= static_cast<T>((wr.end - wr.begin) * (wc.end - wc.begin));
        out.at(m, y, x) = acc;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pool_backward(const PoolSpec& spec, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out) {
  require_spatial(input.shape(), "pool backward");
  const std::size_t maps = input.shape()[0];
  const Extent2 in{input.shape()[1], input.shape()[2]};
  const Extent2 o = pool_output(spec, in);
  require_same(Shape{maps, o.rows, o.cols}, grad_out.shape(), "pool backward");
  BasicTensor<T> grad_in(input.shape());
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t y = 0; y < o.rows; ++y) {
      const Window wr = pool_window(y, spec, in.rows);
      for (std::size_t x = 0; x < o.cols; ++x) {
        const Window wc = pool_window(x, spec, in.cols);
        const T g = grad_out.at(m, y, x);
        if (spec.kind == PoolKind::average) {
          const T share = g / static_cast<T>((wr.end - wr.begin) * (wc.end - wc.begin));
          for (std::size_t r = wr.begin; r < wr.end; ++r)
            for (std::size_t c = wc.begin; c < wc.end; ++c) grad_in.at(m, r, c) += share;
        } else {
          std::size_t br = wr.begin, bc = wc.begin;
          T best = input.at(m, br, bc);
          for (std::size_t r = wr.begin; r < wr.end; ++r)
            for (std::size_t c = wc.begin; c < wc.end; ++c)
              if (input.at(m, r, c) > best) {
                best = input.at(m, r, c);
                br = r;
                bc = c;
              }
          grad_in.at(m, br, bc) += g;
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------

namespace {

/// Maps contributing to the normalizer of map k: `size` maps starting
/// floor(size/2) before k, clamped to [0, K-1].
Window lrn_window(std::size_t k, std::size_t size, std::size_t maps) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(size / 2);
  const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(k) - half;
  const std::ptrdiff_t hi = lo + static_cast<std::ptrdiff_t>(size);
  return {static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0)),
          static_cast<std::size_t>(std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(maps)))};
}

/// 1 + (alpha/size) * sum of squares over the window, per element.
template <typename T>
BasicTensor<T> lrn_scale(const LrnSpec& spec, const BasicTensor<T>& input) {
  const std::size_t maps = input.shape()[0];
  const std::size_t plane = input.shape()[1] * input.shape()[2];
  const T coef = static_cast<T>(spec.alpha / static_cast<double>(spec.size));
  BasicTensor<T> scale(input.shape());
  for (std::size_t k = 0; k < maps; ++k) {
    const Window w = lrn_window(k, spec.size, maps);
    T* dst = scale.data() + k * plane;
    for (std::size_t j = 0; j < plane; ++j) {
      T acc{};
      for (std::size_t q = w.begin; q < w.end; ++q) {
        const T v = input.data()[q * plane + j];
        acc += v * v;
      }
      dst[j] = T(1) + coef * acc;
    }
  }
  return scale;
}

}  // namespace

template <typename T>
BasicTensor<T> lrn_forward(const LrnSpec& spec, const BasicTensor<T>& input) {
  require_spatial(input.shape(), "lrn layer");
  validate(spec);
  const BasicTensor<T> scale = lrn_scale(spec, input);
  const T beta = static_cast<T>(spec.beta);
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = input.data()[i] / std::pow(scale.data()[i], beta);
  out.require_finite("lrn output");
  return out;
}

template <typename T>
BasicTensor<T> lrn_backward(const LrnSpec& spec, const BasicTensor<T>& input,
                            const BasicTensor<T>& grad_out) {
  require_spatial(input.shape(), "lrn backward");
  require_same(input.shape(), grad_out.shape(), "lrn backward");
  validate(spec);
  const std::size_t maps = input.shape()[0];
  const std::size_t plane = input.shape()[1] * input.shape()[2];
  const BasicTensor<T> scale = lrn_scale(spec, input);
  const T beta = static_cast<T>(spec.beta);
  const T coef = static_cast<T>(2.0 * spec.alpha * spec.beta / static_cast<double>(spec.size));

  // ratio_k = g_k * x_k * scale_k^(-beta-1), summed over every k whose
  // window contains the map being differentiated.
  BasicTensor<T> ratio(input.shape());
  for (std::size_t i = 0; i < ratio.size(); ++i)
    ratio.data()[i] = grad_out.data()[i] * input.data()[i] * std::pow(scale.data()[i], -beta - T(1));

  BasicTensor<T> grad_in(input.shape());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(spec.size / 2);
  for (std::size_t j = 0; j < maps; ++j) {
    // k's window holds j  <=>  j - size + 1 + half <= k <= j + half.
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(spec.size) + 1 + half;
    const std::size_t kb = static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0));
    const std::size_t ke = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(j) + half + 1, static_cast<std::ptrdiff_t>(maps)));
    for (std::size_t p = 0; p < plane; ++p) {
      T acc{};
      for (std::size_t k = kb; k < ke; ++k) acc += ratio.data()[k * plane + p];
      const std::size_t idx = j * plane + p;
      grad_in.data()[idx] =
          grad_out.data()[idx] / std::pow(scale.data()[idx], beta) - coef * input.data()[idx] * acc;
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> fc_forward(const FcLayer<T>& layer, const BasicTensor<T>& x) {
  if (x.rank() != 1 || x.size() != layer.in())
    throw ShapeError("fc layer expects a vector of " + std::to_string(layer.in()) + ", got " + x.shape().str());
  const std::size_t n_in = layer.in();
  BasicTensor<T> y(Shape{layer.out()});
  for (std::size_t o = 0; o < layer.out(); ++o) {
    const T* w = layer.weights.data() + o * n_in;
    T acc{};
    for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x.data()[i];
    y[o] = layer.has_bias() ? acc + layer.biases[o] : acc;
  }
  y.require_finite("fc output");
  return y;
}

template <typename T>
std::optional<BasicTensor<T>> fc_backward(const FcLayer<T>& layer, const BasicTensor<T>& x,
                                          const BasicTensor<T>& grad_out, ParamGrads<T>& grads,
                                          bool want_input_grad) {
  require_same(Shape{layer.out()}, grad_out.shape(), "fc backward");
  if (x.rank() != 1 || x.size() != layer.in()) throw ShapeError("fc backward: input " + x.shape().str());
  if (grads.weights.shape() != layer.weights.shape()) grads.weights = BasicTensor<T>(layer.weights.shape());
  if (layer.has_bias() && grads.biases.shape() != layer.biases.shape())
    grads.biases = BasicTensor<T>(layer.biases.shape());
  const std::size_t n_in = layer.in();
  for (std::size_t o = 0; o < layer.out(); ++o) {
    const T g = grad_out[o];
    T* gw = grads.weights.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) gw[i] += g * x.data()[i];
    if (layer.has_bias()) grads.biases[o] += g;
  }
  if (!want_input_grad) return std::nullopt;
  BasicTensor<T> gx(Shape{n_in});
  for (std::size_t o = 0; o < layer.out(); ++o) {
    const T g = grad_out[o];
    const T* w = layer.weights.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) gx.data()[i] += g * w[i];
  }
  return gx;
}

namespace {

constexpr std::size_t kRowBlock = 8;

template <typename T>
void check_fc_batch(const FcLayer<T>& layer, const std::vector<BasicTensor<T>>& xs) {
  for (const auto& x : xs)
    if (x.rank() != 1 || x.size() != layer.in())
      throw ShapeError("fc layer expects vectors of " + std::to_string(layer.in()) + ", got " + x.shape().str());
}

}  // namespace

template <typename T>
std::vector<BasicTensor<T>> fc_forward_batch(const FcLayer<T>& layer,
                                             const std::vector<BasicTensor<T>>& xs) {
  check_fc_batch(layer, xs);
  const std::size_t batch = xs.size();
  const std::size_t n_in = layer.in();
  const std::size_t n_out = layer.out();
  // Inputs transposed to [in, batch] so the inner loop runs over samples.
  std::vector<T> xt(n_in * batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n_in; ++i) xt[i * batch + b] = xs[b].data()[i];

  std::vector<T> acc(kRowBlock * batch);
  std::vector<BasicTensor<T>> ys(batch, BasicTensor<T>(Shape{n_out}));
  for (std::size_t o0 = 0; o0 < n_out; o0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n_out - o0);
    std::fill(acc.begin(), acc.end(), T(0));
    for (std::size_t i = 0; i < n_in; ++i) {
      const T* x = xt.data() + i * batch;
      for (std::size_t r = 0; r < rows; ++r) {
        const T w = layer.weights.data()[(o0 + r) * n_in + i];
        T* a = acc.data() + r * batch;
        for (std::size_t b = 0; b < batch; ++b) a[b] += w * x[b];
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = o0 + r;
      for (std::size_t b = 0; b < batch; ++b) {
        const T v = acc[r * batch + b];
        ys[b][o] = layer.has_bias() ? v + layer.biases[o] : v;
      }
    }
  }
  for (const auto& y : ys) y.require_finite("fc output");
  return ys;
}

template <typename T>
std::vector<BasicTensor<T>> fc_backward_batch(const FcLayer<T>& layer,
                                              const std::vector<BasicTensor<T>>& xs,
                                              const std::vector<BasicTensor<T>>& grad_outs,
                                              ParamGrads<T>& grads, bool want_input_grad) {
  check_fc_batch(layer, xs);
  if (grad_outs.size() != xs.size()) throw ShapeError("fc backward: batch size mismatch");
  for (const auto& g : grad_outs) require_same(Shape{layer.out()}, g.shape(), "fc backward");
  if (grads.weights.shape() != layer.weights.shape()) grads.weights = BasicTensor<T>(layer.weights.shape());
  if (layer.has_bias() && grads.biases.shape() != layer.biases.shape())
    grads.biases = BasicTensor<T>(layer.biases.shape());
  const std::size_t batch = xs.size();
  const std::size_t n_in = layer.in();
  const std::size_t n_out = layer.out();

  for (std::size_t o0 = 0; o0 < n_out; o0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n_out - o0);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* x = xs[b].data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = o0 + r;
        const T g = grad_outs[b][o];
        T* gw = grads.weights.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) gw[i] += g * x[i];
        if (layer.has_bias()) grads.biases[o] += g;
      }
    }
  }
  if (!want_input_grad) return {};

  std::vector<BasicTensor<T>> gxs(batch, BasicTensor<T>(Shape{n_in}));
  for (std::size_t o0 = 0; o0 < n_out; o0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n_out - o0);
    for (std::size_t b = 0; b < batch; ++b) {
      T* gx = gxs[b].data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = o0 + r;
        const T g = grad_outs[b][o];
        const T* w = layer.weights.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) gx[i] += g * w[i];
      }
    }
  }
  return gxs;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  if (x.rank() != 1 || x.empty()) throw ShapeError("softmax expects a non-empty vector, got " + x.shape().str());
  x.require_finite("softmax input");
  const T mx = *std::max_element(x.values().begin(), x.values().end());
  BasicTensor<T> y(x.shape());
  T sum{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (T& v : y.values()) v /= sum;
  return y;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
  require_same(y.shape(), grad_out.shape(), "softmax backward");
  T dot{};
  for (std::size_t i = 0; i < y.size(); ++i) dot += grad_out[i] * y[i];
  BasicTensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] * (grad_out[i] - dot);
  return g;
}

#define STEGNET_INSTANTIATE(T)                                                                     \
  template struct ConvLayer<T>;                                                                    \
  template struct FcLayer<T>;                                                                      \
  template BasicTensor<T> high_pass_kernel<T>();                                                   \
  template BasicTensor<T> high_pass_forward(const BasicTensor<T>&);                                \
  template BasicTensor<T> high_pass_backward(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> conv_forward(const ConvLayer<T>&, const BasicTensor<T>&);                \
  template std::optional<BasicTensor<T>> conv_backward(const ConvLayer<T>&, const BasicTensor<T>&, \
                                                       const BasicTensor<T>&, ParamGrads<T>&, bool); \
  template BasicTensor<T> pad_forward(const PadSpec&, const BasicTensor<T>&);                      \
  template BasicTensor<T> pad_backward(const PadSpec&, const BasicTensor<T>&);                     \
  template BasicTensor<T> activation_forward(const ActivationSpec&, const BasicTensor<T>&);        \
  template BasicTensor<T> activation_backward(const ActivationSpec&, const BasicTensor<T>&,        \
                                              const BasicTensor<T>&);                              \
  template BasicTensor<T> pool_forward(const PoolSpec&, const BasicTensor<T>&);                    \
  template BasicTensor<T> pool_backward(const PoolSpec&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> lrn_forward(const LrnSpec&, const BasicTensor<T>&);                      \
  template BasicTensor<T> lrn_backward(const LrnSpec&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> fc_forward(const FcLayer<T>&, const BasicTensor<T>&);                    \
  template std::optional<BasicTensor<T>> fc_backward(const FcLayer<T>&, const BasicTensor<T>&,     \
                                                     const BasicTensor<T>&, ParamGrads<T>&, bool); \
  template std::vector<BasicTensor<T>> fc_forward_batch(const FcLayer<T>&,                        \
                                                        const std::vector<BasicTensor<T>>&);       \
  template std::vector<BasicTensor<T>> fc_backward_batch(                                          \
      const FcLayer<T>&, const std::vector<BasicTensor<T>>&, const std::vector<BasicTensor<T>>&,   \
      ParamGrads<T>&, bool);                                                                       \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                          \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);

STEGNET_INSTANTIATE(float)
STEGNET_INSTANTIATE(double)

#undef STEGNET_INSTANTIATE

}  // namespace stegnet
