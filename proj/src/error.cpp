// SPDX-License-Identifier: Apache-2.0
#include "pathsage/error.hpp"

namespace pathsage {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSplitOverlap: return "SplitOverlap";
    case ErrorCode::kDegenerateGraph: return "DegenerateGraph";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidAxis: return "InvalidAxis";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kOddDimension: return "OddDimension";
    case ErrorCode::kPathTooLong: return "PathTooLong";
    case ErrorCode::kEmptyBucket: return "EmptyBucket";
    case ErrorCode::kWidthMismatch: return "WidthMismatch";
    case ErrorCode::kInvalidTarget: return "InvalidTarget";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidPlan:
      return ErrorKind::kUsage;
    case ErrorCode::kNonFiniteLoss:
      return ErrorKind::kNumerical;
    default:
      return ErrorKind::kData;
  }
}

}  // namespace pathsage
