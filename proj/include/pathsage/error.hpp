// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathsage {

enum class ErrorCode {
  kMissingFile,
  kMalformedRecord,
  kIndexOutOfRange,
  kDimensionMismatch,
  kSplitOverlap,
  kDegenerateGraph,
  kInvalidPlan,
  kShapeMismatch,
  kInvalidAxis,
  kNonScalarLoss,
  kOddDimension,
  kPathTooLong,
  kEmptyBucket,
  kWidthMismatch,
  kInvalidTarget,
  kNonFiniteLoss,
  kIoError,
  kVersionMismatch,
  kChecksumMismatch,
  kLengthMismatch,
  kEmptySplit,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Coarse grouping used by the CLI to pick an exit status.
enum class ErrorKind { kUsage, kData, kNumerical };
ErrorKind kind_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pathsage
