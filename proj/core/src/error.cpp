#include "vlo/error.hpp"

namespace vlo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDegenerateAngle: return "degenerate-angle";
    case ErrorCode::kDegenerateWarp: return "degenerate-warp";
    case ErrorCode::kEmptyMask: return "empty-mask";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kDeterminism: return "determinism";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace vlo
