#include "branchlab/errors.hpp"

namespace branchlab {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMeasure: return "EmptyMeasure";
    case ErrorCode::InvalidMass: return "InvalidMass";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::NotCentered: return "NotCentered";
    case ErrorCode::TruncationMismatch: return "TruncationMismatch";
    case ErrorCode::InfiniteNorm: return "InfiniteNorm";
    case ErrorCode::UnbalancedMeasures: return "UnbalancedMeasures";
    case ErrorCode::NotMonotone: return "NotMonotone";
    case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorCode::DivergentBoundaryNorm: return "DivergentBoundaryNorm";
    case ErrorCode::NodeNotFound: return "NodeNotFound";
    case ErrorCode::OverlappingBlocks: return "OverlappingBlocks";
    case ErrorCode::InvalidDelta: return "InvalidDelta";
    case ErrorCode::OutOfValidity: return "OutOfValidity";
    case ErrorCode::NoSeeds: return "NoSeeds";
    case ErrorCode::StaleInput: return "StaleInput";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

}  // namespace branchlab
