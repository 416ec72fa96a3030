#pragma once

#include <stdexcept>
#include <string>

namespace ridgerisk {

enum class ErrorCode {
  NonPositiveEigenvalue,
  NonPositiveWeight,
  WeightsDoNotSumToOne,
  EmptySpectrum,
  OrderViolation,
  LengthMismatch,
  NonFiniteValue,
  InvalidArgument,
  DomainError,
  NoConvergence,
  SingularDerivative,
  SourceMismatch,
  NormalizationViolation,
  NonFiniteRisk,
  DecompositionFailure,
  SingularPrior,
  SchemaError,
  ValueError,
  UnknownParameter,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C API and the CLI can map it to a status / exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for errors that come from the numerics rather than from user input.
bool is_numerical(ErrorCode code) noexcept;

}  // namespace ridgerisk
