#include "lightd/error.hpp"

namespace lightd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDecodeError: return "decode_error";
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kBackendUnavailable: return "backend_unavailable";
    case ErrorCode::kBackendError: return "backend_error";
    case ErrorCode::kUnsupportedCapability: return "unsupported_capability";
    case ErrorCode::kDegenerateEmbedding: return "degenerate_embedding";
    case ErrorCode::kDegenerateDistribution: return "degenerate_distribution";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kNonFiniteLoss: return "non_finite_loss";
    case ErrorCode::kIoError: return "io_error";
  }
  return "unknown";
}

}  // namespace lightd
