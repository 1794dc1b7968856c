#include "spotlight/error.hpp"

namespace spotlight {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::OddShape: return "OddShape";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ConstantImage: return "ConstantImage";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidSharpness: return "InvalidSharpness";
    case ErrorCode::InvalidCache: return "InvalidCache";
    case ErrorCode::NoForegroundPatches: return "NoForegroundPatches";
    case ErrorCode::PlacementFailed: return "PlacementFailed";
    case ErrorCode::ConstantRange: return "ConstantRange";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::ZeroProfile: return "ZeroProfile";
    case ErrorCode::Incompatible: return "Incompatible";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

}  // namespace spotlight
