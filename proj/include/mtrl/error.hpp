#pragma once
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtrl {

enum class ErrorCode {
  DimensionMismatch,
  EmptyTask,
  EmptyDataset,
  DuplicateTaskId,
  InvalidHyperparams,
  InvalidKernel,
  InvalidCovariance,
  NotSymmetric,
  NotPSD,
  Singular,
  SingularSystem,
  DegenerateTaskVariance,
  TaskIndexOutOfRange,
  MaxIterationsExceeded,
  DegenerateGram,
  NonDecreaseDetected,
  UnknownTask,
  UnsupportedKernel,
  SigmaOutOfRange,
  Infeasible,
  SolverStalled,
  NegativeSimilarity,
  AsymmetricSimilarity,
  IndexOutOfRange,
  SelfEdge,
  EmptyCluster,
  ParseError,
  EmptyFile,
  IoError,
  ZeroVarianceTruth,
  GridEmpty,
  InsufficientData,
  VersionMismatch,
  CorruptModel,
  InvalidArgument,
};

std::string_view error_name(ErrorCode code) noexcept;

// Every failure surfaced by the library carries one of the codes above; the
// CLI prints `error: <Name>: <message>` on a single line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace mtrl
