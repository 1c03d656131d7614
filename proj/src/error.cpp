#include "legible/error.hpp"

namespace legible {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::LabelerUnavailable: return "LabelerUnavailable";
    case ErrorCode::MalformedLabelerOutput: return "MalformedLabelerOutput";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InsufficientGroups: return "InsufficientGroups";
    case ErrorCode::InvalidCalibration: return "InvalidCalibration";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace legible
