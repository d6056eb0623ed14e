#include "stegnet/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace stegnet {

const char* to_string(IoErrc code) noexcept {
  switch (code) {
    case IoErrc::open_failed: return "cannot open file";
    case IoErrc::bad_magic: return "bad magic";
    case IoErrc::unsupported_depth: return "unsupported depth";
    case IoErrc::truncated: return "truncated";
    case IoErrc::checksum_mismatch: return "checksum mismatch";
    case IoErrc::version_mismatch: return "version mismatch";
    case IoErrc::malformed: return "malformed";
  }
  return "unknown";
}

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 4)
    throw ShapeError("tensor rank must be 1 to 4, got " + std::to_string(dims_.size()));
}

std::size_t Shape::num_elements() const noexcept {
  if (dims_.empty()) return 0;
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_.num_elements(), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_.num_elements())
    throw ShapeError("tensor " + shape_.str() + " given " + std::to_string(data_.size()) +
                     " values");
}

template <typename T>
std::span<T> BasicTensor<T>::map(std::size_t m) {
  if (rank() != 3 || m >= shape_[0]) throw ShapeError("no map " + std::to_string(m) + " in " + shape_.str());
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<T>(data_).subspan(m * plane, plane);
}

template <typename T>
std::span<const T> BasicTensor<T>::map(std::size_t m) const {
  if (rank() != 3 || m >= shape_[0]) throw ShapeError("no map " + std::to_string(m) + " in " + shape_.str());
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<const T>(data_).subspan(m * plane, plane);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const& {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) && {
  return BasicTensor(std::move(shape), std::move(data_));
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void BasicTensor<T>::require_finite(std::string_view what) const {
  for (const T v : data_) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + std::string(what));
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace stegnet
