#pragma once

#include <stdexcept>
#include <string>

namespace uvolmax {

/// Argument outside the mathematical domain of an operation (a <= 0, lo > hi, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input combination the requested solver does not handle (e.g. a Markov
/// liability passed to the deterministic quadrature).
class UnsupportedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-finite values, divergent fixed point, broken stability bound.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid scenario file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uvolmax
