#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmsb {

enum class ErrorKind {
  Parse,
  Schema,
  Validation,
  Coverage,
  DegenerateDimension,
  InsufficientData,
  Underflow,
  NonConvergence,
  Numerical,
  Argument,
  State,
  OutOfRange,
  Refusal,
  Io,
  Generation,
};

std::string_view to_string(ErrorKind kind);

/// Whether an error of this kind is a usage/validation problem (exit 2)
/// rather than a runtime or numerical failure (exit 1).
bool is_usage_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mmsb
