#pragma once

#include <stdexcept>
#include <string>

namespace poer {

// Invalid configuration value or inconsistent dimensions.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an API precondition (step after terminal, non-scalar loss...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN or infinity where a finite value is required.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was invoked in a phase where it is forbidden
// (e.g. training the RND predictor while replaying).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace poer
