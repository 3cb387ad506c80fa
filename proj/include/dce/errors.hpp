#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dce {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonPhysicalInput : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class RegimeViolation : public Error { using Error::Error; };

// Numerical failures.
class QuadratureFailure : public Error { using Error::Error; };
class RootFindingFailure : public Error { using Error::Error; };
class StepSizeError : public Error { using Error::Error; };
class OptimizationFailure : public Error { using Error::Error; };
class GridTooSmall : public Error { using Error::Error; };
class StabilityViolation : public Error { using Error::Error; };
class FitFailure : public Error { using Error::Error; };

// Front-end failures.
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class UnknownScenario : public Error { using Error::Error; };

/// Soft regime diagnostic. Validity gates report these instead of throwing so
/// that parameter sweeps can chart where an approximation stops holding.
struct Warning {
  std::string code;
  std::string message;
};

using Warnings = std::vector<Warning>;

inline void warn(Warnings* sink, std::string code, std::string message) {
  if (sink != nullptr) sink->push_back({std::move(code), std::move(message)});
}

}  // namespace dce
