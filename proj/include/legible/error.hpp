#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace legible {

enum class ErrorCode {
  NonPositiveInput,
  InsufficientSamples,
  EmptyWindow,
  OutOfOrder,
  InvalidLabel,
  LabelerUnavailable,
  MalformedLabelerOutput,
  InvalidParams,
  InsufficientData,
  SingularSystem,
  StorageError,
  InvalidSpec,
  CalibrationFailed,
  LengthMismatch,
  DegenerateInput,
  InsufficientGroups,
  InvalidCalibration,
  UnknownSession,
  UnknownModel,
  ParseError,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as this exception; callers branch on
// code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace legible
