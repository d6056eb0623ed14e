#pragma once

#include <cstddef>

#include "stegnet/tensor.hpp"

namespace stegnet {

/// Rounding of the strided output extent. `ceil` zero-extends the trailing
/// partial window instead of dropping it.
enum class SizeMode { floor, ceil };

struct Extent2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

/// Output extent of a strided window sweep along one axis:
/// mode((n + 2*pad - kernel) / stride) + 1. Throws ShapeError if the
/// kernel does not fit or the result would be zero.
std::size_t out_size(std::size_t n, std::size_t kernel, std::size_t stride, std::size_t pad,
                     SizeMode mode);

struct ConvGeometry {
  Extent2 input;
  Extent2 kernel;
  std::size_t stride = 1;
  std::size_t pad = 0;
  SizeMode mode = SizeMode::floor;

  Extent2 output() const;

  /// Extent of the zero-extended input actually swept: large enough for
  /// every window, including ceil-mode trailing ones.
  Extent2 swept() const;
};

/// Grows the two trailing (spatial) axes by `pad` zeros on each side.
template <typename T>
BasicTensor<T> pad_zero(const BasicTensor<T>& input, std::size_t pad);

/// Asymmetric form: rows get `top`/`bottom`, cols get `left`/`right`.
template <typename T>
BasicTensor<T> pad_zero(const BasicTensor<T>& input, std::size_t top, std::size_t bottom,
                        std::size_t left, std::size_t right);

/// Inverse of pad_zero: drops the border, keeping the `rows` x `cols`
/// block starting at (top, left) of every map.
template <typename T>
BasicTensor<T> crop(const BasicTensor<T>& input, std::size_t top, std::size_t left,
                    std::size_t rows, std::size_t cols);

/// Summed multi-map cross-correlation: one output map equal to
/// sum_i input[i] (*) kernels[i] at strided positions of the zero-padded
/// input. input is [maps, H, W], kernels [maps, fH, fW]; the result is
/// [outH, outW].
///
/// Each output value accumulates kernel row-major, then input map
/// ascending, starting from zero.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const ConvGeometry& geom);

namespace detail {

/// Zero-pads a [maps, H, W] input to geom.swept().
template <typename T>
BasicTensor<T> sweep_input(const BasicTensor<T>& input, const ConvGeometry& geom);

/// out[y, x] += sum over (kr, kc, i) of swept[i, y*s+kr, x*s+kc] * kernels[i, kr, kc].
/// `kernels` holds maps*fH*fW values laid out [i][kr][kc].
template <typename T>
void correlate_accumulate(const BasicTensor<T>& swept, const T* kernels, const ConvGeometry& geom,
                          T* out);

/// Adjoint of correlate_accumulate with respect to the kernels:
/// kgrad[i, kr, kc] += sum_{y, x} grad[y, x] * swept[i, y*s+kr, x*s+kc].
template <typename T>
void kernel_grad_accumulate(const BasicTensor<T>& swept, const T* grad, const ConvGeometry& geom,
                            T* kgrad);

/// Adjoint with respect to the input:
/// swept_grad[i, y*s+kr, x*s+kc] += grad[y, x] * kernels[i, kr, kc].
template <typename T>
void input_grad_accumulate(const T* kernels, const T* grad, const ConvGeometry& geom,
                           BasicTensor<T>& swept_grad);

}  // namespace detail

}  // namespace stegnet
