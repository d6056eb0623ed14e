#pragma once

// Naive reference implementations. Each loops over output elements directly
// and reads inputs by index arithmetic, with the same per-element summation
// order as the library kernels so results can be compared exactly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "stegnet/layers.hpp"

namespace oracle {

using stegnet::BasicTensor;
using stegnet::Shape;

template <typename T>
T padded_at(const BasicTensor<T>& in, std::size_t m, std::ptrdiff_t r, std::ptrdiff_t c) {
  if (r < 0 || c < 0 || r >= std::ptrdiff_t(in.shape()[1]) || c >= std::ptrdiff_t(in.shape()[2])) return T(0);
  return in.at(m, std::size_t(r), std::size_t(c));
}

/// kernels [K, maps, fh, fw]; output [K, oh, ow].
template <typename T>
BasicTensor<T> conv(const BasicTensor<T>& in, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                    std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow) {
  const std::size_t K = kernels.shape()[0], maps = kernels.shape()[1];
  const std::size_t fh = kernels.shape()[2], fw = kernels.shape()[3];
  BasicTensor<T> out(Shape{K, oh, ow});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        T acc = 0;
        for (std::size_t kr = 0; kr < fh; ++kr)
          for (std::size_t kc = 0; kc < fw; ++kc)
            for (std::size_t i = 0; i < maps; ++i) {
              const T w = kernels.data()[((k * maps + i) * fh + kr) * fw + kc];
              acc += w * padded_at(in, i, std::ptrdiff_t(y * stride + kr) - std::ptrdiff_t(pad),
                                   std::ptrdiff_t(x * stride + kc) - std::ptrdiff_t(pad));
            }
        out.at(k, y, x) = bias.empty() ? acc : acc + bias[k];
      }
  return out;
}

template <typename T>
BasicTensor<T> lrn(const BasicTensor<T>& in, double alpha, double beta, std::size_t size) {
  const std::size_t K = in.shape()[0];
  const std::ptrdiff_t half = std::ptrdiff_t(size / 2);
  BasicTensor<T> out(in.shape());
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t r = 0; r < in.shape()[1]; ++r)
      for (std::size_t c = 0; c < in.shape()[2]; ++c) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(k) - half);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(std::ptrdiff_t(K), std::ptrdiff_t(k) - half + std::ptrdiff_t(size));
        T acc = 0;
        for (std::ptrdiff_t q = lo; q < hi; ++q) acc += in.at(std::size_t(q), r, c) * in.at(std::size_t(q), r, c);
        const T denom = T(1) + T(alpha / double(size)) * acc;
        out.at(k, r, c) = in.at(k, r, c) / std::pow(denom, T(beta));
      }
  return out;
}

template <typename T>
BasicTensor<T> fc(const BasicTensor<T>& w, const BasicTensor<T>& b, const BasicTensor<T>& x) {
  const std::size_t out_n = w.shape()[0], in_n = w.shape()[1];
  BasicTensor<T> y(Shape{out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    T acc = 0;
    for (std::size_t i = 0; i < in_n; ++i) acc += w.data()[o * in_n + i] * x[i];
    y[o] = b.empty() ? acc : acc + b[o];
  }
  return y;
}

/// Windows start at y*stride - pad and keep only in-bounds elements.
template <typename T>
BasicTensor<T> pool(const BasicTensor<T>& in, bool average, std::size_t window, std::size_t stride, std::size_t pad,
                    std::size_t oh, std::size_t ow) {
  BasicTensor<T> out(Shape{in.shape()[0], oh, ow});
  const auto H = std::ptrdiff_t(in.shape()[1]), W = std::ptrdiff_t(in.shape()[2]);
  for (std::size_t m = 0; m < in.shape()[0]; ++m)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const std::ptrdiff_t r0 = std::ptrdiff_t(y * stride) - std::ptrdiff_t(pad);
        const std::ptrdiff_t c0 = std::ptrdiff_t(x * stride) - std::ptrdiff_t(pad);
        T acc = average ? T(0) : -INFINITY;
        std::size_t n = 0;
        for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(r0, 0); r < std::min(r0 + std::ptrdiff_t(window), H); ++r)
          for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(c0, 0); c < std::min(c0 + std::ptrdiff_t(window), W); ++c) {
            const T v = in.at(m, std::size_t(r), std::size_t(c));
            if (average) acc += v;
            else acc = std::max(acc, v);
            ++n;
          }
        out.at(m, y, x) = average ? acc / T(n) : acc;
      }
  return out;
}

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  BasicTensor<T> t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = T(u(rng));
  return t;
}

/// Central difference of scalar f with respect to x[i].
inline double numeric_grad(std::function<double()> f, double& x, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

}  // namespace oracle
