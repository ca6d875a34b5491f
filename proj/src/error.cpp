#include "mmsb/error.hpp"

namespace mmsb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Coverage: return "coverage error";
    case ErrorKind::DegenerateDimension: return "degenerate dimension";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Underflow: return "kernel underflow";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::State: return "state error";
    case ErrorKind::OutOfRange: return "out of range";
    case ErrorKind::Refusal: return "refused";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Generation: return "generation error";
  }
  return "error";
}

bool is_usage_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Schema:
    case ErrorKind::Validation:
    case ErrorKind::Coverage:
    case ErrorKind::DegenerateDimension:
    case ErrorKind::InsufficientData:
    case ErrorKind::Argument:
    case ErrorKind::State:
    case ErrorKind::OutOfRange:
    case ErrorKind::Refusal:
      return true;
    default:
      return false;
  }
}

}  // namespace mmsb
