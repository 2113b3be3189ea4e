#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repcycle {

enum class ErrorCode {
  kInvalidConfiguration,
  kDegenerateGeometry,
  kInvalidInput,
  kClippedGeometry,
  kInvalidLabel,
  kOutOfFrame,
  kCannotSplit,
  kShapeMismatch,
  kDegenerateProjection,
  kDegenerateAlignment,
  kNoData,
  kUnpairedDiscipline,
  kNonFiniteLoss,
  kChecksumMismatch,
  kUsage,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; code() is stable for tests
// and for the CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) {
    fail(code, message);
  }
}

}  // namespace repcycle
