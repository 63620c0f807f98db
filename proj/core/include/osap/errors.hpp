#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace osap {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A model evaluation produced a NaN/Inf state.
class NumericOverflowError : public Error {
 public:
  NumericOverflowError(const std::string& msg, std::vector<double> state = {})
      : Error(msg), offending_state(std::move(state)) {}
  std::vector<double> offending_state;
};

/// Finite differencing left the model's numeric domain.
class LinearizationError : public Error {
 public:
  using Error::Error;
};

/// Steady-state Newton solve did not converge; the reference is numerically
/// inadmissible.
class ReferenceInadmissibleError : public Error {
 public:
  using Error::Error;
};

/// The normal matrix of the one-step LQR subproblem is singular.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// DARE fixed-point iteration diverged or hit its iteration cap.
class DareError : public Error {
 public:
  using Error::Error;
};

/// More than the tolerated fraction of grid points failed to label.
class DatasetDegenerateError : public Error {
 public:
  DatasetDegenerateError(const std::string& msg, std::size_t failures, std::size_t total)
      : Error(msg), failure_count(failures), total_count(total) {}
  std::size_t failure_count = 0;
  std::size_t total_count = 0;
};

/// On-disk format/schema mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training loss became non-finite.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& msg, int epoch_index)
      : Error(msg), epoch(epoch_index) {}
  int epoch = -1;
};

/// A closed-loop state left the safety box.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int step_index)
      : Error(msg), step(step_index) {}
  int step = -1;
};

/// The tracking-bound denominator is nonpositive (theta <= theta_min).
class BoundUndefinedError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace osap
