#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cate {

// Failure taxonomy shared by every layer. Each enumerator names the condition
// it reports, not the module that raised it.
enum class ErrorKind {
  // data validation
  NonBinaryValue,
  EmptyArm,
  LengthMismatch,
  NonFiniteInput,
  NoCompliers,
  ZeroDenominator,
  // randomization
  InvalidArmSize,
  TooManyAssignments,
  // model fitting
  DegenerateDesign,
  SeparationDetected,
  SingularHessian,
  NoConvergence,
  // estimation
  WeakDenominator,
  InsufficientArmSize,
  DegenerateCalibration,
  NonPositiveDf,
  // simulation
  InvalidCovariance,
  // reporting / IO
  ParseError,
  MissingColumn,
  ConfigError,
  IoError,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonBinaryValue: return "NonBinaryValue";
    case ErrorKind::EmptyArm: return "EmptyArm";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::NoCompliers: return "NoCompliers";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::InvalidArmSize: return "InvalidArmSize";
    case ErrorKind::TooManyAssignments: return "TooManyAssignments";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::SeparationDetected: return "SeparationDetected";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::WeakDenominator: return "WeakDenominator";
    case ErrorKind::InsufficientArmSize: return "InsufficientArmSize";
    case ErrorKind::DegenerateCalibration: return "DegenerateCalibration";
    case ErrorKind::NonPositiveDf: return "NonPositiveDf";
    case ErrorKind::InvalidCovariance: return "InvalidCovariance";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Conditions an estimator handled but the caller should know about.
// Strict mode upgrades Separation / WeakDenominator / DidNotConverge to Error.
enum class WarningKind {
  Separation,
  WeakDenominator,
  ClippedProbabilities,
  DroppedColumns,
  DidNotConverge,
};

inline const char* warning_kind_name(WarningKind k) {
  switch (k) {
    case WarningKind::Separation: return "separation";
    case WarningKind::WeakDenominator: return "weak_denominator";
    case WarningKind::ClippedProbabilities: return "clipped_probabilities";
    case WarningKind::DroppedColumns: return "dropped_columns";
    case WarningKind::DidNotConverge: return "did_not_converge";
  }
  return "unknown";
}

struct Warning {
  WarningKind kind;
  std::string message;
};

inline bool has_warning(const std::vector<Warning>& ws, WarningKind k) {
  for (const auto& w : ws)
    if (w.kind == k) return true;
  return false;
}

}  // namespace cate
