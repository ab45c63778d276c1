#pragma once

#include <stdexcept>
#include <string>

namespace dualms {

enum class ErrorCode {
  InvalidArgument,
  DomainEmpty,
  DegenerateInput,
  ZeroFlow,
  GraphDisconnected,
  PortConflict,
  InfeasibleStart,
  NotFeasible,
  TooLarge,
  EmptySkeleton,
  NonFiniteLoss,
  EmptySurface,
  ThicknessTooLarge,
  MissingArtifact,
  ConfigInvalid,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainEmpty: return "DomainEmpty";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ZeroFlow: return "ZeroFlow";
    case ErrorCode::GraphDisconnected: return "GraphDisconnected";
    case ErrorCode::PortConflict: return "PortConflict";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::NotFeasible: return "NotFeasible";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::EmptySkeleton: return "EmptySkeleton";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::ThicknessTooLarge: return "ThicknessTooLarge";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dualms
