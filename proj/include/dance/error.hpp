#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dance {

enum class ErrorKind {
  Io,
  MissingValue,
  DuplicateHeader,
  TooFewRows,
  UnknownVariable,
  InvalidArgument,
  TooFewSamples,
  DegenerateVariance,
  TooFewCandidates,
  SingularDenominator,
  SingularMomentMatrix,
  EmptyDnctList,
  BootstrapDegenerate,
  NonConvergence,
  InvalidGraph,
};

std::string_view to_string(ErrorKind kind);

/// All library failures are reported through this type; `kind()` lets callers
/// (the CLI exit-code mapping, the study harness failure log) branch without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dance
