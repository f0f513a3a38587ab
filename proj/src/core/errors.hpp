#pragma once

#include <stdexcept>
#include <string>

namespace goodhart {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveVariance,
  DegenerateCovariance,
  ShapeTooSmall,
  InsufficientAcceptance,
  DegenerateWeights,
  QuadratureNonConvergence,
  PoleAtZero,
  InsufficientTrajectory,
  SchemaMismatch,
  Unsupported,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace goodhart
