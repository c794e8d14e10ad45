#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sacp {

enum class ErrorCode {
  MissingFile,
  HeaderPayloadMismatch,
  InvariantViolation,
  IoFailure,
  NonFiniteInput,
  LabelOutOfRange,
  ShapeMismatch,
  EmptyCalibrationSet,
  UnlabeledCalPixel,
  EmptyTestSet,
  EmptyInput,
  InvalidConfig,
  NotEnoughLabeledPixels,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::HeaderPayloadMismatch: return "HeaderPayloadMismatch";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorCode::UnlabeledCalPixel: return "UnlabeledCalPixel";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NotEnoughLabeledPixels: return "NotEnoughLabeledPixels";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures of the filesystem rather than of the data.
  bool is_io() const noexcept {
    return code_ == ErrorCode::MissingFile || code_ == ErrorCode::IoFailure;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace sacp
