#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

/// Stable error classes. The CLI maps code() to the process exit status,
/// so the numbering here is part of the documented interface.
enum class ErrorCode : int {
  unexpected = 1,
  parse = 2,
  validation = 3,
  unknown_reference = 4,
  bad_arguments = 5,
  dimension_mismatch = 6,
  singular_pair = 7,
  vacuous_bound = 8,
  ill_posed = 9,
  unreachable_boundary = 10,
  not_primitive = 11,
  bracket_failure = 12,
  table_too_large = 13,
  no_convergence = 14,
  horizon_exceeded = 15,
  not_centered = 16,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& message)
      : Error(ErrorCode::validation, message) {}
};

struct DimensionMismatchError : Error {
  explicit DimensionMismatchError(const std::string& message)
      : Error(ErrorCode::dimension_mismatch, message) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& message)
      : Error(ErrorCode::parse, message) {}
};

struct UnknownReferenceError : Error {
  explicit UnknownReferenceError(const std::string& name)
      : Error(ErrorCode::unknown_reference, "unknown reference: " + name) {}
};

struct BadArgumentsError : Error {
  explicit BadArgumentsError(const std::string& message)
      : Error(ErrorCode::bad_arguments, message) {}
};

/// The two input densities have disjoint supports, so no coupling step exists.
struct SingularPairError : Error {
  explicit SingularPairError(const std::string& message)
      : Error(ErrorCode::singular_pair, message) {}
};

/// A contraction-based bound degenerates (kappa = 0) and cannot certify anything.
struct VacuousBoundError : Error {
  explicit VacuousBoundError(const std::string& message)
      : Error(ErrorCode::vacuous_bound, message) {}
};

/// The weighted operator has spectral radius >= 1; the defining series diverges.
struct IllPosedError : Error {
  explicit IllPosedError(const std::string& message)
      : Error(ErrorCode::ill_posed, message) {}
};

struct UnreachableBoundaryError : Error {
  explicit UnreachableBoundaryError(const std::string& message)
      : Error(ErrorCode::unreachable_boundary, message) {}
};

/// No power of the transition matrix up to N^2 is strictly positive.
struct NotPrimitiveError : Error {
  explicit NotPrimitiveError(const std::string& message)
      : Error(ErrorCode::not_primitive, message) {}
};

struct BracketFailureError : Error {
  explicit BracketFailureError(const std::string& message)
      : Error(ErrorCode::bracket_failure, message) {}
};

struct TableTooLargeError : Error {
  explicit TableTooLargeError(const std::string& message)
      : Error(ErrorCode::table_too_large, message) {}
};

struct NoConvergenceError : Error {
  explicit NoConvergenceError(const std::string& message)
      : Error(ErrorCode::no_convergence, message) {}
};

struct HorizonExceededError : Error {
  explicit HorizonExceededError(const std::string& message)
      : Error(ErrorCode::horizon_exceeded, message) {}
};

struct NotCenteredError : Error {
  explicit NotCenteredError(const std::string& message)
      : Error(ErrorCode::not_centered, message) {}
};

}  // namespace ergo
