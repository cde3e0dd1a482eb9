#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rbdf {

/// Failure classes raised by the library. The CLI maps them to exit codes.
enum class ErrorKind {
  InvalidArgument,
  Config,
  NonFinite,
  HTooSmall,
  HNotLessThanL,
  SpanTooShort,
  TailNotConverged,
  NotSteady,
  NoConvergence,
  DivisionByZero,
  Infeasible,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::HTooSmall: return "HTooSmall";
    case ErrorKind::HNotLessThanL: return "HNotLessThanL";
    case ErrorKind::SpanTooShort: return "SpanTooShort";
    case ErrorKind::TailNotConverged: return "TailNotConverged";
    case ErrorKind::NotSteady: return "NotSteady";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by time integrators; carries the simulation time of the failure.
class NonFiniteError : public Error {
 public:
  NonFiniteError(double t, const std::string& what)
      : Error(ErrorKind::NonFinite, what + " (t=" + std::to_string(t) + ")"), time_(t) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace rbdf
