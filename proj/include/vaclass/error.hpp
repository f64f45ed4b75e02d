#pragma once

#include <stdexcept>
#include <string>

namespace vaclass {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclass to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsuitable input data: bad WAV, manifest row, too few frames (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown such as a covariance that is not positive definite (exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vaclass
