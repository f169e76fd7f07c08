#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rppg {

enum class ErrorCode {
  MissingFile,
  MalformedManifest,
  SizeMismatch,
  IoError,
  MalformedCsv,
  InvalidConfig,
  DegenerateRoi,
  EmptyTrack,
  NonMonotonicIndices,
  AllFramesInvalid,
  NonPositiveMean,
  WindowTooShort,
  SignalTooShort,
  ZeroVariance,
  LengthMismatch,
  SessionTooShort,
  EmptyBand,
  EmptySeries,
  EmptyWindowGt,
  EmptyInput,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateRoi: return "DegenerateRoi";
    case ErrorCode::EmptyTrack: return "EmptyTrack";
    case ErrorCode::NonMonotonicIndices: return "NonMonotonicIndices";
    case ErrorCode::AllFramesInvalid: return "AllFramesInvalid";
    case ErrorCode::NonPositiveMean: return "NonPositiveMean";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SessionTooShort: return "SessionTooShort";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::EmptyWindowGt: return "EmptyWindowGt";
    case ErrorCode::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

/// Input/validation failures, as opposed to failures while processing valid input.
constexpr bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedManifest:
    case ErrorCode::SizeMismatch:
    case ErrorCode::MalformedCsv:
    case ErrorCode::InvalidConfig:
    case ErrorCode::EmptyTrack:
    case ErrorCode::NonMonotonicIndices:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rppg
