#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbmv {

enum class ErrorCode {
  EmptyDataset,
  OrphanTeam,
  OrphanPatient,
  CrossNesting,
  DuplicateId,
  DimensionMismatch,
  MissingValue,
  ParseError,
  IoError,
  BadPredictorIndex,
  InvalidConstraint,
  InvalidSpec,
  NonPositiveResponse,
  InvalidPriors,
  InvalidConfig,
  NumericalBreakdown,
  EmptySamples,
  MissingRandomIntercept,
  ZeroVariance,
  LayoutMismatch,
  UnknownUnit,
  InvalidTruth,
  Usage,
};

std::string_view error_name(ErrorCode code) noexcept;

// Process exit code used by the CLI; distinct per error code, never 0.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the sampler; carries the sweep index and the block that failed.
class NumericalBreakdown : public Error {
 public:
  NumericalBreakdown(long iteration, std::string block, const std::string& detail)
      : Error(ErrorCode::NumericalBreakdown,
              "numerical breakdown at iteration " + std::to_string(iteration) +
                  " in block '" + block + "': " + detail),
        iteration_(iteration),
        block_(std::move(block)) {}

  long iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  long iteration_;
  std::string block_;
};

}  // namespace hbmv
