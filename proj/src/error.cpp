#include "cadence/error.hpp"

#include <nlohmann/json.hpp>

namespace cadence {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingStem: return "MissingStem";
    case ErrorCode::BeatOrderViolation: return "BeatOrderViolation";
    case ErrorCode::SectionOutOfRange: return "SectionOutOfRange";
    case ErrorCode::InvalidBundle: return "InvalidBundle";
    case ErrorCode::InvalidAudio: return "InvalidAudio";
    case ErrorCode::EmptySpan: return "EmptySpan";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::NoHighSegment: return "NoHighSegment";
    case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::SinkUnavailable: return "SinkUnavailable";
    case ErrorCode::NoCutpointsAvailable: return "NoCutpointsAvailable";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::PhaseInGuidedMode: return "PhaseInGuidedMode";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::string field)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(std::move(message)),
      field_(std::move(field)) {}

std::string Error::to_json() const {
  nlohmann::json j;
  j["error"] = std::string(to_string(code_));
  j["message"] = message_;
  if (!field_.empty()) j["field"] = field_;
  return j.dump();
}

}  // namespace cadence
