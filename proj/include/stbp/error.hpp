#pragma once

#include <stdexcept>
#include <string>

namespace stbp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupt data files (IDX, AER, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a gradient or parameter.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration keys or values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stbp
