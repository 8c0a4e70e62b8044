#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace overlqr {

enum class ErrorKind {
  NotHurwitz,
  SingularSolve,
  EigenFailure,
  DimensionMismatch,
  NotStabilizing,
  NoConvergence,
  SingleLayer,
  DegenerateEta,
  AllProbesUnstable,
  StepUnderflow,
  NoKernelVector,
  NotSaddle,
  Pole,
  OutOfRange,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::SingularSolve: return "SingularSolve";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotStabilizing: return "NotStabilizing";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingleLayer: return "SingleLayer";
    case ErrorKind::DegenerateEta: return "DegenerateEta";
    case ErrorKind::AllProbesUnstable: return "AllProbesUnstable";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::NoKernelVector: return "NoKernelVector";
    case ErrorKind::NotSaddle: return "NotSaddle";
    case ErrorKind::Pole: return "Pole";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace overlqr
