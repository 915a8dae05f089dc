#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace facadealign {

enum class ErrorCode {
  kDegenerateBox = 1,
  kNonFinite,
  kConfidenceOutOfRange,
  kSetMismatch,
  kDegenerateInput,
  kRankOutOfRange,
  kZeroBaseline,
  kNoGroundTruth,
  kImageIdMismatch,
  kParseError,
  kUnknownLabel,
  kEmptyCrop,
  kBadRatios,
  kSpecOverflow,
  kInputMissing,
  kConfigInvalid,
  kInvalidArgument,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace facadealign
