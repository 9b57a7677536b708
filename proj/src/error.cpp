#include "delaysync/error.hpp"

namespace delaysync {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotATree: return "NotATree";
    case ErrorKind::BoundViolation: return "BoundViolation";
    case ErrorKind::MissingDelay: return "MissingDelay";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::HistoryUnderrun: return "HistoryUnderrun";
    case ErrorKind::HorizonTooShort: return "HorizonTooShort";
    case ErrorKind::SingularPencil: return "SingularPencil";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::NotStabilizable: return "NotStabilizable";
    case ErrorKind::NotDetectable: return "NotDetectable";
    case ErrorKind::NotObservable: return "NotObservable";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::CompletionFailed: return "CompletionFailed";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::AssumptionViolation: return "AssumptionViolation";
    case ErrorKind::NoDeltaFound: return "NoDeltaFound";
    case ErrorKind::NoEpsilonFound: return "NoEpsilonFound";
    case ErrorKind::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotATree:
    case ErrorKind::BoundViolation:
    case ErrorKind::MissingDelay:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::StepTooLarge:
    case ErrorKind::HistoryUnderrun:
    case ErrorKind::HorizonTooShort:
      return true;
    default:
      return false;
  }
}

}  // namespace delaysync
