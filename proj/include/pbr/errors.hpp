#pragma once

#include <stdexcept>
#include <string>

namespace pbr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or configuration (maps to CLI exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedScenario : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ZeroCountSetting : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BadSplit : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical failures inside the optimizers (maps to CLI exit code 1).
class SolverFailure : public Error {
 public:
  using Error::Error;
};

class NumericalDegeneracy : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

class SupportMismatch : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

}  // namespace pbr
