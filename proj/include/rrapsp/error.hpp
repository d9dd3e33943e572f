#pragma once

#include <stdexcept>
#include <string>

namespace rrapsp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a numerical precondition (non-PSD, zero normal, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Krylov construction was asked to start from a (near) zero vector.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside their documented ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rrapsp
