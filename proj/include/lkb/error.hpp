#pragma once

#include <stdexcept>
#include <string>

namespace lkb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (asymmetric weights, unnormalized contexts, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A scalar or size parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or a broken numerical invariant.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A caller violated the round protocol (arm outside D_t, off-grid query, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lkb
