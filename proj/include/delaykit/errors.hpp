#pragma once

#include <stdexcept>
#include <string>

namespace delaykit {

// Failure categories map 1:1 onto the CLI exit codes.
enum class ErrorCategory { config = 2, numerical = 3, statistics = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }
  int exit_code() const noexcept { return static_cast<int>(cat_); }

private:
  ErrorCategory cat_;
};

#define DELAYKIT_ERROR(NAME, CAT)                          \
  class NAME : public Error {                              \
  public:                                                  \
    explicit NAME(const std::string& msg)                  \
        : Error(ErrorCategory::CAT, msg) {}                \
  }

DELAYKIT_ERROR(InvalidParameterError, config);
DELAYKIT_ERROR(InvalidGeometryError, config);
DELAYKIT_ERROR(SchemaError, config);

DELAYKIT_ERROR(ClosedChannelError, numerical);
DELAYKIT_ERROR(NumericalSingularityError, numerical);
DELAYKIT_ERROR(ResolutionError, numerical);
DELAYKIT_ERROR(ApproximationDomainError, numerical);
DELAYKIT_ERROR(MassCoverageError, numerical);
DELAYKIT_ERROR(UndefinedMomentError, numerical);

DELAYKIT_ERROR(InsufficientStatisticsError, statistics);
DELAYKIT_ERROR(FitWindowError, statistics);

#undef DELAYKIT_ERROR

}  // namespace delaykit
