#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polarflow {

enum class ErrorCode {
  DimensionMismatch,
  NotSymmetric,
  NotSpd,
  NoConvergence,
  Singular,
  NegativeDeterminant,
  OffFiber,
  NotConverged,
  IllConditioned,
  DimensionTooLarge,
  ExhaustedDraws,
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotSpd: return "NotSpd";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NegativeDeterminant: return "NegativeDeterminant";
    case ErrorCode::OffFiber: return "OffFiber";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::ExhaustedDraws: return "ExhaustedDraws";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace polarflow
