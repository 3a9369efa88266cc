#pragma once

#include <stdexcept>
#include <string>

namespace pmu {

enum class ErrorKind {
  MalformedCase,
  MissingSlack,
  DuplicateBusId,
  DanglingBranch,
  DisconnectedNetwork,
  SingularMatrix,
  UnknownBus,
  UnknownBranch,
  UnknownCandidate,
  PatternExplosion,
  NotPositiveDefinite,
  SearchSpaceTooLarge,
  EquivalenceViolation,
  DegenerateSampleCovariance,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorKind kind);

// Every library failure is reported through this type; kind() lets callers
// branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Numerical failures map to exit code 2 in the CLI, everything else to 1.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::SingularMatrix || kind_ == ErrorKind::NotPositiveDefinite ||
           kind_ == ErrorKind::PatternExplosion ||
           kind_ == ErrorKind::DegenerateSampleCovariance;
  }

 private:
  ErrorKind kind_;
};

}  // namespace pmu
