#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvboost {

// Every failure raised by the library carries one of these codes so callers
// (the CLI in particular) can map it to an exit status without string matching.
enum class ErrorCode {
  kMissingColumn,
  kNonNumericCell,
  kEmptyDataset,
  kConstantResponse,
  kInvalidSpec,
  kInvalidSchema,
  kCorruptModelFile,
  kVersionMismatch,
  kEmptyInput,
  kDegenerateHoldout,
  kShapeMismatch,
  kUnfittedModel,
  kMissingTrace,
  kDimensionMismatch,
  kTooFewItems,
  kTooFewRows,
  kUnknownFeature,
  kUnknownLevel,
  kInvalidConfig,
  kIo,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kNonNumericCell: return "NonNumericCell";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kConstantResponse: return "ConstantResponse";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidSchema: return "InvalidSchema";
    case ErrorCode::kCorruptModelFile: return "CorruptModelFile";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDegenerateHoldout: return "DegenerateHoldout";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnfittedModel: return "UnfittedModel";
    case ErrorCode::kMissingTrace: return "MissingTrace";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooFewItems: return "TooFewItems";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kUnknownLevel: return "UnknownLevel";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvboost
