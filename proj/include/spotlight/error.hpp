#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spotlight {

enum class ErrorCode {
  CorruptFile,
  UnsupportedFormat,
  TooSmall,
  OddShape,
  OutOfBounds,
  ShapeMismatch,
  ConstantImage,
  EmptyMask,
  InvalidSharpness,
  InvalidCache,
  NoForegroundPatches,
  PlacementFailed,
  ConstantRange,
  EmptyProfile,
  ZeroProfile,
  Incompatible,
  InvalidConfig,
  NumericFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spotlight
