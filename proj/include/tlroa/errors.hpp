#pragma once

#include <stdexcept>
#include <string>

namespace tlroa {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input/validation failures (bad config, unreadable file, malformed data).
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Computation failures (solver breakdown, non-convergence). Exit code 1.
class ComputationError : public Error {
 public:
  using Error::Error;
};

// --- model ---
class SingularInertia : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class OutOfWindow : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DegenerateNetwork : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NonConvergent : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

// --- network ---
class InsufficientData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NonPositiveSlope : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

// --- integrate ---
class StepFailure : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class NonFiniteState : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class DivergenceGuard : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class InvalidFaultWindow : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// --- roa ---
class NoConvergence : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class NotHurwitz : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class SeedNotAttracted : public ComputationError {
 public:
  using ComputationError::ComputationError;
};
class ImmediateExit : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

}  // namespace tlroa
