#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace effop {

enum class ErrorCode {
  NotHermitian,
  NonFinite,
  SolverFailure,
  IndexOutOfRange,
  DuplicateIndex,
  CapTooTight,
  DimensionMismatch,
  SingularProjection,
  SylvesterSingular,
  MaxIterExceeded,
  Diverged,
  NotDecoupled,
  NotAnEigenvector,
  NotInSubspace,
  ZeroVector,
  NotCommuting,
  PartitionInvalid,
  InvalidSpec,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::CapTooTight: return "CapTooTight";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularProjection: return "SingularProjection";
    case ErrorCode::SylvesterSingular: return "SylvesterSingular";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NotDecoupled: return "NotDecoupled";
    case ErrorCode::NotAnEigenvector: return "NotAnEigenvector";
    case ErrorCode::NotInSubspace: return "NotInSubspace";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NotCommuting: return "NotCommuting";
    case ErrorCode::PartitionInvalid: return "PartitionInvalid";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// True for failures of a numerical procedure (as opposed to bad input).
/// The CLI maps these to exit code 2.
inline bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::SolverFailure:
    case ErrorCode::SylvesterSingular:
    case ErrorCode::MaxIterExceeded:
    case ErrorCode::Diverged:
    case ErrorCode::NotDecoupled:
      return true;
    default:
      return false;
  }
}

/// %.3e, for error messages where to_string would print 0.000000.
inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace effop
