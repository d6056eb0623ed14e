#include "stegnet/conv.hpp"

#include <algorithm>
#include <string>

namespace stegnet {

std::size_t out_size(std::size_t n, std::size_t kernel, std::size_t stride, std::size_t pad,
                     SizeMode mode) {
  if (stride == 0) throw ShapeError("stride must be positive");
  if (kernel == 0) throw ShapeError("kernel extent must be positive");
  const std::size_t padded = n + 2 * pad;
  if (padded < kernel)
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded extent " +
                     std::to_string(padded));
  const std::size_t span = padded - kernel;
  const std::size_t steps = mode == SizeMode::floor ? span / stride : (span + stride - 1) / stride;
  return steps + 1;
}

Extent2 ConvGeometry::output() const {
  return {out_size(input.rows, kernel.rows, stride, pad, mode),
          out_size(input.cols, kernel.cols, stride, pad, mode)};
}

Extent2 ConvGeometry::swept() const {
  const Extent2 out = output();
  return {std::max(input.rows + 2 * pad, (out.rows - 1) * stride + kernel.rows),
          std::max(input.cols + 2 * pad, (out.cols - 1) * stride + kernel.cols)};
}

template <typename T>
BasicTensor<T> pad_zero(const BasicTensor<T>& input, std::size_t pad) {
  return pad_zero(input, pad, pad, pad, pad);
}

template <typename T>
BasicTensor<T> pad_zero(const BasicTensor<T>& input, std::size_t top, std::size_t bottom,
                        std::size_t left, std::size_t right) {
  if (input.rank() < 2) throw ShapeError("pad_zero needs a spatial tensor, got " + input.shape().str());
  std::vector<std::size_t> dims = input.shape().dims();
  const std::size_t rows = dims[dims.size() - 2];
  const std::size_t cols = dims[dims.size() - 1];
  const std::size_t planes = input.size() / (rows * cols);
  dims[dims.size() - 2] = rows + top + bottom;
  dims[dims.size() - 1] = cols + left + right;
  BasicTensor<T> out{Shape(dims)};
  const std::size_t out_cols = cols + left + right;
  const std::size_t out_plane = (rows + top + bottom) * out_cols;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* src = input.data() + (p * rows + r) * cols;
      T* dst = out.data() + p * out_plane + (r + top) * out_cols + left;
      std::copy(src, src + cols, dst);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> crop(const BasicTensor<T>& input, std::size_t top, std::size_t left,
                    std::size_t rows, std::size_t cols) {
  if (input.rank() < 2) throw ShapeError("crop needs a spatial tensor, got " + input.shape().str());
  std::vector<std::size_t> dims = input.shape().dims();
  const std::size_t in_rows = dims[dims.size() - 2];
  const std::size_t in_cols = dims[dims.size() - 1];
  if (top + rows > in_rows || left + cols > in_cols)
    throw ShapeError("crop window exceeds " + input.shape().str());
  const std::size_t planes = input.size() / (in_rows * in_cols);
  dims[dims.size() - 2] = rows;
  dims[dims.size() - 1] = cols;
  BasicTensor<T> out{Shape(dims)};
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* src = input.data() + (p * in_rows + r + top) * in_cols + left;
      std::copy(src, src + cols, out.data() + (p * rows + r) * cols);
    }
  }
  return out;
}

namespace detail {

template <typename T>
BasicTensor<T> sweep_input(const BasicTensor<T>& input, const ConvGeometry& geom) {
  const Extent2 sw = geom.swept();
  const std::size_t bottom = sw.rows - geom.input.rows - geom.pad;
  const std::size_t right = sw.cols - geom.input.cols - geom.pad;
  return pad_zero(input, geom.pad, bottom, geom.pad, right);
}

template <typename T>
void correlate_accumulate(const BasicTensor<T>& swept, const T* kernels, const ConvGeometry& geom,
                          T* out) {
  const Extent2 o = geom.output();
  const Extent2 sw = geom.swept();
  const std::size_t maps = swept.shape()[0];
  const std::size_t s = geom.stride;
  const std::size_t fh = geom.kernel.rows;
  const std::size_t fw = geom.kernel.cols;
  for (std::size_t kr = 0; kr < fh; ++kr) {
    for (std::size_t kc = 0; kc < fw; ++kc) {
      for (std::size_t i = 0; i < maps; ++i) {
        const T w = kernels[(i * fh + kr) * fw + kc];
        const T* plane = swept.data() + i * sw.rows * sw.cols;
        for (std::size_t y = 0; y < o.rows; ++y) {
          const T* src = plane + (y * s + kr) * sw.cols + kc;
          T* dst = out + y * o.cols;
          for (std::size_t x = 0; x < o.cols; ++x) dst[x] += w * src[x * s];
        }
      }
    }
  }
}

template <typename T>
void kernel_grad_accumulate(const BasicTensor<T>& swept, const T* grad, const ConvGeometry& geom,
                            T* kgrad) {
  const Extent2 o = geom.output();
  const Extent2 sw = geom.swept();
  const std::size_t maps = swept.shape()[0];
  const std::size_t s = geom.stride;
  const std::size_t fh = geom.kernel.rows;
  const std::size_t fw = geom.kernel.cols;
  for (std::size_t i = 0; i < maps; ++i) {
    const T* plane = swept.data() + i * sw.rows * sw.cols;
    for (std::size_t kr = 0; kr < fh; ++kr) {
      for (std::size_t kc = 0; kc < fw; ++kc) {
        T acc{};
        for (std::size_t y = 0; y < o.rows; ++y) {
          const T* src = plane + (y * s + kr) * sw.cols + kc;
          const T* g = grad + y * o.cols;
          for (std::size_t x = 0; x < o.cols; ++x) acc += g[x] * src[x * s];
        }
        kgrad[(i * fh + kr) * fw + kc] += acc;
      }
    }
  }
}

template <typename T>
void input_grad_accumulate(const T* kernels, const T* grad, const ConvGeometry& geom,
                           BasicTensor<T>& swept_grad) {
  const Extent2 o = geom.output();
  const Extent2 sw = geom.swept();
  const std::size_t maps = swept_grad.shape()[0];
  const std::size_t s = geom.stride;
  const std::size_t fh = geom.kernel.rows;
  const std::size_t fw = geom.kernel.cols;
  for (std::size_t i = 0; i < maps; ++i) {
    T* plane = swept_grad.data() + i * sw.rows * sw.cols;
    for (std::size_t kr = 0; kr < fh; ++kr) {
      for (std::size_t kc = 0; kc < fw; ++kc) {
        const T w = kernels[(i * fh + kr) * fw + kc];
        for (std::size_t y = 0; y < o.rows; ++y) {
          T* dst = plane + (y * s + kr) * sw.cols + kc;
          const T* g = grad + y * o.cols;
          for (std::size_t x = 0; x < o.cols; ++x) dst[x * s] += w * g[x];
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const ConvGeometry& geom) {
  if (input.rank() != 3) throw ShapeError("conv2d input must be [maps, H, W], got " + input.shape().str());
  if (kernels.rank() != 3) throw ShapeError("conv2d kernels must be [maps, fH, fW], got " + kernels.shape().str());
  const Shape& is = input.shape();
  const Shape& ks = kernels.shape();
  if (ks[0] != is[0])
    throw ShapeError("conv2d: " + std::to_string(ks[0]) + " kernels for " + std::to_string(is[0]) + " maps");
  if (geom.input != Extent2{is[1], is[2]} || geom.kernel != Extent2{ks[1], ks[2]})
    throw ShapeError("conv2d: geometry does not match tensors " + is.str() + " / " + ks.str());
  const Extent2 o = geom.output();
  BasicTensor<T> out(Shape{o.rows, o.cols});
  detail::correlate_accumulate(detail::sweep_input(input, geom), kernels.data(), geom, out.data());
  out.require_finite("conv2d output");
  return out;
}

#define STEGNET_INSTANTIATE(T)                                                                    \
  template BasicTensor<T> pad_zero(const BasicTensor<T>&, std::size_t);                           \
  template BasicTensor<T> pad_zero(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t,  \
                                   std::size_t);                                                  \
  template BasicTensor<T> crop(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t,      \
                               std::size_t);                                                      \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const ConvGeometry&); \
  template BasicTensor<T> detail::sweep_input(const BasicTensor<T>&, const ConvGeometry&);        \
  template void detail::correlate_accumulate(const BasicTensor<T>&, const T*, const ConvGeometry&, \
                                             T*);                                                 \
  template void detail::kernel_grad_accumulate(const BasicTensor<T>&, const T*,                   \
                                               const ConvGeometry&, T*);                          \
  template void detail::input_grad_accumulate(const T*, const T*, const ConvGeometry&,            \
                                              BasicTensor<T>&);

STEGNET_INSTANTIATE(float)
STEGNET_INSTANTIATE(double)

#undef STEGNET_INSTANTIATE

}  // namespace stegnet
