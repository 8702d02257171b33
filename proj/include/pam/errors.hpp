/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by all modules.
 *
 * Each error category maps onto one CLI exit code: configuration errors
 * exit with 2, numerical failures with 3.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace pam {

/// Base class of every library error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A spectral density was evaluated at a singular point.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A quadrature, root finder or scheme failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A root finder was asked for a value the function never attains.
class NoSolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A requested model lies outside every supported regime.
class UnsupportedRegimeError : public Error {
 public:
  using Error::Error;
};

/// A replica exceeded the instability bound and was abandoned.
class AbortedReplicaError : public NumericalError {
 public:
  AbortedReplicaError(const std::string& what, int step)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Too few samples or replicas for a statistical procedure.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A sample has zero spread and cannot be standardized.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A run configuration failed validation. `path` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : Error(path + ": " + msg), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace pam
