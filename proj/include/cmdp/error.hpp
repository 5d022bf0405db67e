#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmdp {

enum class ErrorCode {
  kInvalidArgument,
  kNotErgodic,
  kSingularSystem,
  kInfeasible,
  kUnbounded,
  kNumericalFailure,
  kInfeasibleFloor,
  kInvalidHorizon,
  kAssumptionViolated,
  kNonConvergence,
  kNoFeasiblePoint,
  kParseError,
  kInvariantViolation,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNotErgodic: return "NotErgodic";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kUnbounded: return "Unbounded";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kInfeasibleFloor: return "InfeasibleFloor";
    case ErrorCode::kInvalidHorizon: return "InvalidHorizon";
    case ErrorCode::kAssumptionViolated: return "AssumptionViolated";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kNoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

/// The single exception type thrown by the library; `code()` tells callers
/// which contract failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace cmdp
