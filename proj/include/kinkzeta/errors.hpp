#pragma once

#include <stdexcept>
#include <string>

namespace kinkzeta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a routine (k^2 >= 1, negative radicand, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the physical regime a model is valid in (m^2 <= 0 for a kink, v >= c, ...).
class RegimeError : public Error {
 public:
  using Error::Error;
};

/// Too few sites, mismatched grids, malformed profiles.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Iterative or quadrature procedure failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested exactly at a pole or branch point.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kinkzeta
