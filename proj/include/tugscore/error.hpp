#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tugscore {

// Failure categories. The CLI maps them onto exit codes: everything except
// Internal and Convergence is a user/input error.
enum class ErrorKind {
  InvalidInput,
  Parameter,
  DegenerateSample,
  Schema,
  Stationary,
  TooShort,
  InsufficientGaitEvents,
  UndefinedSpectrum,
  IncompleteFeature,
  SingularDesign,
  DimensionMismatch,
  Convergence,
  Parse,
  Io,
  Internal,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::DegenerateSample: return "degenerate-sample";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Stationary: return "stationary-subject";
    case ErrorKind::TooShort: return "too-short";
    case ErrorKind::InsufficientGaitEvents: return "insufficient-gait-events";
    case ErrorKind::UndefinedSpectrum: return "undefined-spectrum";
    case ErrorKind::IncompleteFeature: return "incomplete-feature";
    case ErrorKind::SingularDesign: return "singular-design";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// SMO ran out of iterations; carries the last maximal KKT violation.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double violation)
      : Error(ErrorKind::Convergence, message), violation_(violation) {}

  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace tugscore
