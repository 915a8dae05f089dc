#include "facadealign/error.hpp"

namespace facadealign {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateBox: return "DegenerateBox";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::kSetMismatch: return "SetMismatch";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kRankOutOfRange: return "RankOutOfRange";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kNoGroundTruth: return "NoGroundTruth";
    case ErrorCode::kImageIdMismatch: return "ImageIdMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kEmptyCrop: return "EmptyCrop";
    case ErrorCode::kBadRatios: return "BadRatios";
    case ErrorCode::kSpecOverflow: return "SpecOverflow";
    case ErrorCode::kInputMissing: return "InputMissing";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace facadealign
