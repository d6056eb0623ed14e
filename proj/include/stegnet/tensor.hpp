#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stegnet/error.hpp"

namespace stegnet {

/// Extents of a tensor, outermost first. Semantic order is
/// (batch, maps, rows, cols); lower ranks drop leading axes.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  std::size_t num_elements() const noexcept;
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  /// Shorthand for rank-3 (maps, rows, cols) tensors.
  std::size_t maps() const { return dims_.at(rank() - 3); }
  std::size_t rows() const { return dims_.at(rank() - 2); }
  std::size_t cols() const { return dims_.at(rank() - 1); }

  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Dense row-major array of rank 1 to 4.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{});
  BasicTensor(Shape shape, std::vector<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[checked(i)]; }
  const T& operator[](std::size_t i) const { return data_[checked(i)]; }

  /// Element (map, row, col) of a rank-3 tensor.
  T& at(std::size_t m, std::size_t r, std::size_t c) { return data_[checked(offset(m, r, c))]; }
  const T& at(std::size_t m, std::size_t r, std::size_t c) const {
    return data_[checked(offset(m, r, c))];
  }

  /// Plane `m` of a rank-3 tensor.
  std::span<T> map(std::size_t m);
  std::span<const T> map(std::size_t m) const;

  /// Same values under a different shape with equal element count.
  BasicTensor reshaped(Shape shape) const&;
  BasicTensor reshaped(Shape shape) &&;

  void fill(T value);

  /// Throws NumericError naming `what` if any value is NaN or infinite.
  void require_finite(std::string_view what) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  std::size_t offset(std::size_t m, std::size_t r, std::size_t c) const {
#ifdef STEGNET_CHECKED
    if (rank() != 3 || m >= shape_[0] || r >= shape_[1] || c >= shape_[2])
      throw ShapeError("tensor index out of range for " + shape_.str());
#endif
    return (m * shape_[1] + r) * shape_[2] + c;
  }

  std::size_t checked(std::size_t i) const {
#ifdef STEGNET_CHECKED
    if (i >= data_.size()) throw ShapeError("tensor offset out of range for " + shape_.str());
#endif
    return i;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace stegnet
