#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace starflow {

enum class ErrorCode {
  kNonStarShaped,
  kBadGrid,
  kDegenerate,
  kBlowup,
  kFitFailed,
  kWindowTooCoarse,
  kFNonpositive,
  kNonpositiveTime,
  kOverflowGuard,
  kNotEnclosing,
  kEmptyWindow,
  kNoBlowup,
  kNewtonDiverged,
  kBadSigma,
  kParseError,
  kValidationError,
  kMissingArtifact,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the error codes named by each operation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace starflow
