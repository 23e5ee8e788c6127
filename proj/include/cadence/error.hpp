#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cadence {

enum class ErrorCode {
  MissingStem,
  BeatOrderViolation,
  SectionOutOfRange,
  InvalidBundle,
  InvalidAudio,
  EmptySpan,
  EmptyPartition,
  NoHighSegment,
  SpanOutOfRange,
  InvalidSchedule,
  SinkUnavailable,
  NoCutpointsAvailable,
  LengthMismatch,
  ZeroVariance,
  UnknownSession,
  PhaseInGuidedMode,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `field` names the offending input
/// (a JSON key, a file name, an index) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }
  /// Message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

  /// {"error": "<code>", "message": "...", "field": "..."}
  std::string to_json() const;

 private:
  ErrorCode code_;
  std::string message_;
  std::string field_;
};

}  // namespace cadence
