#pragma once

#include <stdexcept>
#include <string>

namespace ellcut {

enum class ErrorKind {
    DimensionMismatch,
    DegenerateShape,
    InvalidBracket,
    InvalidArgument,
    EmptySystem,
    PreconditionViolated,
    StrictFeasibilityViolated,
    SolverBudgetExceeded,
    SizeLimitExceeded,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::DegenerateShape: return "DegenerateShape";
        case ErrorKind::InvalidBracket: return "InvalidBracket";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::EmptySystem: return "EmptySystem";
        case ErrorKind::PreconditionViolated: return "PreconditionViolated";
        case ErrorKind::StrictFeasibilityViolated: return "StrictFeasibilityViolated";
        case ErrorKind::SolverBudgetExceeded: return "SolverBudgetExceeded";
        case ErrorKind::SizeLimitExceeded: return "SizeLimitExceeded";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers what failed.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

}  // namespace ellcut
