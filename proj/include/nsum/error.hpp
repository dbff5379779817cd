#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nsum {

enum class ErrorCode {
  NegativeResponse,
  KnownSizeExceedsTotal,
  ShapeMismatch,
  InvalidConfig,
  DomainError,
  DegenerateSamples,
  DegenerateScale,
  NonFiniteDensity,
  PilotDegenerate,
  ZeroDegreeSum,
  FitDiverged,
  TooFewDraws,
  ZeroWithinVariance,
  Precondition,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` distinguishes failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for errors caused by bad input (data, config, flags) rather than sampler failure.
  bool is_validation() const noexcept {
    switch (code_) {
      case ErrorCode::NegativeResponse:
      case ErrorCode::KnownSizeExceedsTotal:
      case ErrorCode::ShapeMismatch:
      case ErrorCode::InvalidConfig:
      case ErrorCode::Precondition:
      case ErrorCode::Io:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace nsum
