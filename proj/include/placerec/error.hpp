#pragma once

#include <stdexcept>
#include <string>

namespace placerec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid option value or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, malformed or mutually incompatible input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The computation has no meaningful answer for the given input
/// (degenerate cloud, all-zero projection matrix, undefined recall).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace placerec
