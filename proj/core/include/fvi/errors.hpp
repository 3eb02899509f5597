#pragma once

#include <stdexcept>
#include <string>

namespace fvi {

// Error taxonomy. The CLI maps ConfigError to exit code 1, NumericError to 2
// and InvariantError to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters, unknown names, inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input outside a mathematical domain (e.g. Lambert W below -1/e).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation needs a contract the object does not provide.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate estimates, failed inversions.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace fvi
