#pragma once

#include <stdexcept>
#include <string>

namespace mdac {

/// Base of every numerical failure (the CLI maps these to exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The potential Hessian has an infinite or non-positive diagonal entry.
class SingularHessianError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A rollout left the finite region guarded by kDivergenceLimit.
class RolloutDiverged : public NumericalError {
 public:
  explicit RolloutDiverged(double time)
      : NumericalError("rollout diverged at t = " + std::to_string(time)),
        time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Malformed configuration, files or arguments (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdac
