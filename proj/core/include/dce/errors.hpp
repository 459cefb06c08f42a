#ifndef DCE_ERRORS_HPP
#define DCE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace dce {

enum class ErrorCode {
  kDegenerateFrame,
  kOutOfDomain,
  kDegenerateGamma,
  kNoSolution,
  kBudgetExhausted,
  kBadEndpoints,
  kInitFailed,
  kBadLabels,
  kSchemaError,
  kDimensionMismatch,
  kRemoteFailure,
  kProtocolError,
  kBadConfig,
  kEmptyInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateFrame: return "DegenerateFrame";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kDegenerateGamma: return "DegenerateGamma";
    case ErrorCode::kNoSolution: return "NoSolution";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kBadEndpoints: return "BadEndpoints";
    case ErrorCode::kInitFailed: return "InitFailed";
    case ErrorCode::kBadLabels: return "BadLabels";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kRemoteFailure: return "RemoteFailure";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kEmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

/// Base of every error raised by the engine. The code is stable and is what
/// the CLI reports in its machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by the query gate when the attack budget is spent.
class BudgetExhausted : public Error {
 public:
  explicit BudgetExhausted(const std::string& what)
      : Error(ErrorCode::kBudgetExhausted, what) {}
};

}  // namespace dce

#endif  // DCE_ERRORS_HPP
