#pragma once

#include <stdexcept>
#include <string>

namespace moeforge {

/// Shapes of two operands are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument is outside its valid domain (k out of range, empty input, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation invoked on an object in the wrong state (missing cache, untrained
/// autoencoder, empty split).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A lookup (router for a task id, tensor by name) failed.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid or infeasible configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed data (label outside the category set, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A merge/freeze rule was violated.
class PolicyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// File-level failures while reading or writing artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint load failures. The kind distinguishes the cause.
class LoadError : public std::runtime_error {
 public:
  enum class Kind { Version, Truncated, Checksum, Malformed };

  LoadError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace moeforge
