#pragma once

#include <stdexcept>
#include <string>

namespace redpsm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values (non-finite data, out-of-range parameters).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent shapes between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed files (bad magic, truncated payloads, NaNs in weights).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace redpsm
