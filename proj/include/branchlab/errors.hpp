#pragma once

#include <stdexcept>
#include <string>

namespace branchlab {

enum class ErrorCode {
  EmptyMeasure,
  InvalidMass,
  InvalidScale,
  NotCentered,
  TruncationMismatch,
  InfiniteNorm,
  UnbalancedMeasures,
  NotMonotone,
  TimeOutOfRange,
  DivergentBoundaryNorm,
  NodeNotFound,
  OverlappingBlocks,
  InvalidDelta,
  OutOfValidity,
  NoSeeds,
  StaleInput,
  ConfigError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace branchlab
