#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace delaysync {

enum class ErrorKind {
  // topology / input
  NotATree,
  BoundViolation,
  MissingDelay,
  DimensionMismatch,
  InvalidArgument,
  ParseError,
  StepTooLarge,
  HistoryUnderrun,
  HorizonTooShort,
  // numerical kernels
  SingularPencil,
  NotHurwitz,
  NotStabilizable,
  NotDetectable,
  NotObservable,
  NoConvergence,
  RankDeficient,
  CompletionFailed,
  Overflow,
  // synthesis
  AssumptionViolation,
  NoDeltaFound,
  NoEpsilonFound,
  // simulation
  NonFinite,
};

std::string_view to_string(ErrorKind kind);

/// True for errors caused by the scenario itself (malformed topology, bad
/// bounds, missing delays, parse failures) as opposed to a failed synthesis.
bool is_input_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace delaysync
