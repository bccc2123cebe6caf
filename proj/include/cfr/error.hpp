#pragma once

#include <stdexcept>
#include <string>

namespace cfr {

enum class ErrorCode {
  CycleDetected,
  UndeclaredParent,
  DuplicateFactor,
  ZeroDenominator,
  MissingSlateInterval,
  TooFewSamples,
  RangeViolation,
  BoundViolation,
  InvalidPredictor,
  InconsistentSlate,
  InvalidArgument,
  DegenerateSlate,
  NoFeasiblePoint,
  InsufficientExposure,
  SingularSystem,
  NonConvergence,
  IoError,
  ReadError,
  SchemaMismatch,
  VersionUnsupported,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfr
