#pragma once

#include <stdexcept>
#include <string>

namespace storyline {

enum class ErrorCode {
  kValidation,
  kParseError,
  kInvalidSpec,
  kMissingAssignment,
  kWindowMismatch,
  kSourceMismatch,
  kSpanViolation,
  kSameWindow,
  kLevelMismatch,
  kEmptyCluster,
  kWindowConflict,
  kDuplicateId,
  kUnknownId,
  kUnknownCluster,
  kUnknownSource,
  kDuplicateSource,
  kAlreadyRunning,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "VALIDATION";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kInvalidSpec: return "INVALID_SPEC";
    case ErrorCode::kMissingAssignment: return "MISSING_ASSIGNMENT";
    case ErrorCode::kWindowMismatch: return "WINDOW_MISMATCH";
    case ErrorCode::kSourceMismatch: return "SOURCE_MISMATCH";
    case ErrorCode::kSpanViolation: return "SPAN_VIOLATION";
    case ErrorCode::kSameWindow: return "SAME_WINDOW";
    case ErrorCode::kLevelMismatch: return "LEVEL_MISMATCH";
    case ErrorCode::kEmptyCluster: return "EMPTY_CLUSTER";
    case ErrorCode::kWindowConflict: return "WINDOW_CONFLICT";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kUnknownId: return "UNKNOWN_ID";
    case ErrorCode::kUnknownCluster: return "UNKNOWN_CLUSTER";
    case ErrorCode::kUnknownSource: return "UNKNOWN_SOURCE";
    case ErrorCode::kDuplicateSource: return "DUPLICATE_SOURCE";
    case ErrorCode::kAlreadyRunning: return "ALREADY_RUNNING";
  }
  return "UNKNOWN";
}

/// Exception carrying a stable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

  // Input and configuration problems map to exit code 1, everything else
  // is an internal/runtime failure (exit code 2).
  bool is_validation() const {
    switch (code_) {
      case ErrorCode::kValidation:
      case ErrorCode::kParseError:
      case ErrorCode::kInvalidSpec:
      case ErrorCode::kMissingAssignment:
      case ErrorCode::kUnknownSource:
      case ErrorCode::kDuplicateSource:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace storyline
