#pragma once

#include <stdexcept>
#include <string>

namespace stegnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared in a result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad argument value (out-of-range rate, unknown preset name, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

enum class IoErrc {
  open_failed,
  bad_magic,
  unsupported_depth,
  truncated,
  checksum_mismatch,
  version_mismatch,
  malformed,
};

const char* to_string(IoErrc code) noexcept;

/// File format or file system failure. `code()` distinguishes the cases.
class IoError : public Error {
 public:
  IoError(IoErrc code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  IoErrc code() const noexcept { return code_; }

 private:
  IoErrc code_;
};

}  // namespace stegnet
