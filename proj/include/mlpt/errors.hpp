#pragma once

#include <stdexcept>
#include <string>

namespace mlpt {

// Machine-readable failure categories surfaced by the library.  The CLI maps
// any DomainError to exit code 1; usage problems exit 2.
enum class ErrorCode {
  RadiiNotDecreasing,
  NonPositiveSigma,
  AdjacentEqualConductivity,
  CurveInvalid,
  CurveTooCoarse,
  SingularSystem,
  SingularGpm,
  PointInsideInclusion,
  NonHarmonicCoefficients,
  IllConditionedFit,
  NoConvergence,
  DegenerateDipole,
  PeelExhausted,
  NonPhysicalEstimate,
  NewtonDiverged,
  CertificateFailed,
  DegenerateDenominator,
  GeometryConflict,
  IndexOutOfRange,
  InsufficientSamples,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

class DomainError : public std::runtime_error {
 public:
  DomainError(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw DomainError(code, detail);
}

}  // namespace mlpt
