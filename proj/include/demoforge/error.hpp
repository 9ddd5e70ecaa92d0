#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace demoforge {

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  CountMismatch,
  NonMonotonicTimestamps,
  MalformedQuaternion,
  MalformedMeta,
  IndexOutOfRange,
  CorruptImage,
  NonIntegerStride,
  LengthMismatch,
  NoEstimatorAvailable,
  TooFewSamples,
  TooFewActions,
  IoFailure,
  EmptyInput,
  ChecksumMismatch,
  VersionUnsupported,
  MissingShard,
  EmptyDataset,
  NonFiniteLoss,
  BadExternalFeatureDim,
  NonFiniteAction,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::MalformedQuaternion: return "MalformedQuaternion";
    case ErrorCode::MalformedMeta: return "MalformedMeta";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::NonIntegerStride: return "NonIntegerStride";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoEstimatorAvailable: return "NoEstimatorAvailable";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::TooFewActions: return "TooFewActions";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::MissingShard: return "MissingShard";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadExternalFeatureDim: return "BadExternalFeatureDim";
    case ErrorCode::NonFiniteAction: return "NonFiniteAction";
  }
  return "Unknown";
}

/// True for errors caused by bad input data (parse, QC, checksum) as opposed
/// to usage mistakes or numerical failures at runtime.
inline bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteAction:
    case ErrorCode::IoFailure:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace demoforge
