#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hybridlab {

enum class ErrorKind {
  RowSumViolation,
  NonPositiveRate,
  SingularSystem,
  OutOfRange,
  ShapeMismatch,
  NonFiniteCoefficient,
  NotSPD,
  Blowup,
  GridMismatch,
  LPFailure,
  ParseError,
  ValidationError,
  InvalidArgument,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::RowSumViolation: return "RowSumViolation";
    case ErrorKind::NonPositiveRate: return "NonPositiveRate";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteCoefficient: return "NonFiniteCoefficient";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::Blowup: return "Blowup";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::LPFailure: return "LPFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Every library failure is an Error tagged with its kind; the message names
// the offending row, field or location.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the integrator when |u| crosses the guard.
class BlowupError : public Error {
 public:
  BlowupError(double t, std::uint64_t path, double magnitude)
      : Error(ErrorKind::Blowup, "|u| = " + std::to_string(magnitude) + " at t = " +
                                     std::to_string(t) + " (path " + std::to_string(path) + ")"),
        t_(t),
        path_(path) {}

  double time() const noexcept { return t_; }
  std::uint64_t path() const noexcept { return path_; }

 private:
  double t_;
  std::uint64_t path_;
};

}  // namespace hybridlab
