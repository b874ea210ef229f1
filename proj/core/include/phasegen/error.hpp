#pragma once

#include <stdexcept>
#include <string>

namespace phasegen {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file header or body (PRGW, PRTM, images, config syntax).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A generator whose layer chain or weights are inconsistent.
class ModelValidationError : public Error {
 public:
  using Error::Error;
};

/// Length or shape mismatch between model, operator, measurements or images.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot satisfy the request (too few TM rows, no images, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Every restart of a solve diverged.
class SolveFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace phasegen
