#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nestlab {

enum class ErrorCode {
    InvalidArgument,
    NoSignChange,
    MaxIterations,
    OutOfDomain,
    AtCriticalPoint,
    EscapedDomain,
    NoFixedPoint,
    CriticalOrbitPeriodic,
    ZeroDerivative,
    NotSummable,
    BumpInfeasible,
    NoSegments,
    InsufficientDepth,
    InsufficientBranches,
    SignatureUnstable,
    NeutralSuspected,
    TruncatedByC,
    UnsupportedPrecision,
    IOFailure,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Hard failure of an operation. Soft outcomes (budget exhaustion, a
/// non-returning critical orbit) are reported as status fields instead.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what),
          code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace nestlab
