#pragma once

#include <stdexcept>
#include <string>

namespace seemlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative numeric routine (eigensolver, power iteration) hit its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A regression or law fit is undefined for the given samples.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Parameters or values became non-finite or crossed the divergence threshold.
class CrashError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-facing configuration (config file, flags, file schema).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace seemlab
