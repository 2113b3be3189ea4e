#include "repcycle/error.hpp"

namespace repcycle {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfiguration: return "invalid-configuration";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kClippedGeometry: return "clipped-geometry";
    case ErrorCode::kInvalidLabel: return "invalid-label";
    case ErrorCode::kOutOfFrame: return "out-of-frame";
    case ErrorCode::kCannotSplit: return "cannot-split";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kDegenerateProjection: return "degenerate-projection";
    case ErrorCode::kDegenerateAlignment: return "degenerate-alignment";
    case ErrorCode::kNoData: return "no-data";
    case ErrorCode::kUnpairedDiscipline: return "unpaired-discipline";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace repcycle
