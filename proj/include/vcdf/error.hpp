#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcdf {

enum class ErrorCode {
  NotPositiveDefinite,
  DegenerateTensor,
  Overflow,
  InvalidBandwidth,
  BandwidthTooSmall,
  SingularDesign,
  InsufficientSubjects,
  NoFeasibleBandwidth,
  GridMismatch,
  DegenerateDenominator,
  TooFewSubjects,
  EmptyWindow,
  SingularNormalizer,
  SingularMiddleMatrix,
  InfeasibleConstraint,
  TooFewResamples,
  ShapeMismatch,
  BootstrapFailure,
  ParseError,
  ValidationError,
  ConfigError,
  IoError,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DegenerateTensor: return "DegenerateTensor";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
    case ErrorCode::BandwidthTooSmall: return "BandwidthTooSmall";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
    case ErrorCode::NoFeasibleBandwidth: return "NoFeasibleBandwidth";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::SingularNormalizer: return "SingularNormalizer";
    case ErrorCode::SingularMiddleMatrix: return "SingularMiddleMatrix";
    case ErrorCode::InfeasibleConstraint: return "InfeasibleConstraint";
    case ErrorCode::TooFewResamples: return "TooFewResamples";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BootstrapFailure: return "BootstrapFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace vcdf
