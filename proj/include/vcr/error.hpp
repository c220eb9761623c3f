#pragma once

#include <stdexcept>
#include <string>

namespace vcr {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents or ranks that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters (non-positive temperature, even kernel, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data outside of its documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

// A numeric self-check that did not meet its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vcr
