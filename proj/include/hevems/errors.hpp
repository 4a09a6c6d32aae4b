#pragma once

#include <stdexcept>
#include <string>

namespace hevems {

// Error taxonomy shared by all modules. The CLI maps each family to a
// distinct process exit code (see tools/main.cpp).

// Bad run configuration: missing files, inconsistent options.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (CSV records, map files, checkpoints).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data that parses but violates a physical bound or schema invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation called outside its stated domain (precondition violation).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Battery power request that has no real-valued solution or exceeds limits.
struct InfeasiblePowerError : DomainError {
  using DomainError::DomainError;
};

// Non-finite loss/parameters or other unrecoverable training failure.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint whose layout or hyperparameter block does not match the
// receiving configuration.
struct TransferIncompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hevems
