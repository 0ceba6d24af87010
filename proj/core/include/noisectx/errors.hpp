#pragma once

#include <stdexcept>
#include <string>

namespace noisectx {

/// Operand extents do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller violated an operation's precondition (non-scalar loss, empty context, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, divergence, or a failed numerical check.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system and format failures. The message always carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace noisectx
