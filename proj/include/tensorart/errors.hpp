#pragma once

#include <stdexcept>
#include <string>

namespace tensorart {

/// Bad user input: malformed files, inconsistent configuration, out-of-range
/// indices. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside an otherwise valid computation (non-PD matrix,
/// degenerate conditional, divergence). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an abort flag is observed between sampler iterations.
/// Maps to CLI exit code 130.
class UserAbort : public std::runtime_error {
 public:
  UserAbort() : std::runtime_error("aborted by user") {}
};

}  // namespace tensorart
