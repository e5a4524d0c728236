#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gpnd {

// Bad arguments to an operation (dimension mismatch, non-positive sigma, ...).
class InvalidInputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// File / CSV ingestion problems (missing file, missing column, no usable rows).
class IngestionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A linear-algebra step failed (factorization did not go through even with
// jitter). Carries the offending parameter values for diagnosis.
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string& what, std::string param_detail)
      : std::runtime_error(what + " [" + param_detail + "]"),
        param_detail_(std::move(param_detail)) {}
  const std::string& param_detail() const { return param_detail_; }

private:
  std::string param_detail_;
};

// Training diverged. Carries the epoch and the parameter vector at failure.
class TrainingError : public std::runtime_error {
public:
  TrainingError(const std::string& what, int epoch, Eigen::VectorXd snapshot)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch), snapshot_(std::move(snapshot)) {}
  int epoch() const { return epoch_; }
  const Eigen::VectorXd& snapshot() const { return snapshot_; }

private:
  int epoch_;
  Eigen::VectorXd snapshot_;
};

// Could not synthesize requested data (e.g. negative-pair resampling cap hit).
class GenerationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpnd
