#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hocbf {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  ZeroNormal,
  NoRelativeDegree,
  GainLengthMismatch,
  ZeroRow,
  EmptyInputSet,
  IterationCap,
  CombinatorialBlowup,
  DependencyMismatch,
  InvertedInterval,
  InfeasibleState,
  GMismatch,
  RankDeficient,
  Infeasible,
  NonFiniteState,
  SamplingExhausted,
  InfeasibleAtState,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every library failure; `code()` identifies the contract violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace hocbf
