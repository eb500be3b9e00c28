#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlo {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateAngle,
  kDegenerateWarp,
  kEmptyMask,
  kParse,
  kFormat,
  kIo,
  kInvalidSpec,
  kDivergence,
  kDeterminism,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace vlo
