#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbgl {

enum class ErrorCode {
  // validation
  DimensionMismatch,
  IndexOutOfRange,
  InvalidArgument,
  TooFewRealizations,
  ZeroVarianceSeries,
  ZeroVarianceLocation,
  NotOrthonormal,
  RankDeficient,
  TooLargeForOracle,
  FoldTooSmall,
  DegenerateData,
  // numerical
  NotPositiveDefinite,
  UnboundedProblem,
  MaxIterationsExceeded,
  InnerSolverFailure,
  NonmonotoneObjective,
  SingularLinearization,
  OptimizerDiverged,
  // storage
  Io,
  CorruptFile,
  ChecksumMismatch,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooFewRealizations: return "TooFewRealizations";
    case ErrorCode::ZeroVarianceSeries: return "ZeroVarianceSeries";
    case ErrorCode::ZeroVarianceLocation: return "ZeroVarianceLocation";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::UnboundedProblem: return "UnboundedProblem";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::InnerSolverFailure: return "InnerSolverFailure";
    case ErrorCode::NonmonotoneObjective: return "NonmonotoneObjective";
    case ErrorCode::SingularLinearization: return "SingularLinearization";
    case ErrorCode::OptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::Io: return "Io";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
  }
  return "Unknown";
}

enum class ErrorCategory { Validation, Numerical, Io };

inline ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::UnboundedProblem:
    case ErrorCode::MaxIterationsExceeded:
    case ErrorCode::InnerSolverFailure:
    case ErrorCode::NonmonotoneObjective:
    case ErrorCode::SingularLinearization:
    case ErrorCode::OptimizerDiverged:
      return ErrorCategory::Numerical;
    case ErrorCode::Io:
    case ErrorCode::CorruptFile:
    case ErrorCode::ChecksumMismatch:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Validation;
  }
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace mbgl
