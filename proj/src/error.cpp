#include "hbmv/error.hpp"

namespace hbmv {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::OrphanTeam: return "OrphanTeam";
    case ErrorCode::OrphanPatient: return "OrphanPatient";
    case ErrorCode::CrossNesting: return "CrossNesting";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadPredictorIndex: return "BadPredictorIndex";
    case ErrorCode::InvalidConstraint: return "InvalidConstraint";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonPositiveResponse: return "NonPositiveResponse";
    case ErrorCode::InvalidPriors: return "InvalidPriors";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::MissingRandomIntercept: return "MissingRandomIntercept";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::InvalidTruth: return "InvalidTruth";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) noexcept {
  // 1 is reserved for unexpected failures, 2 for CLI11 parse errors.
  return 10 + static_cast<int>(code);
}

}  // namespace hbmv
