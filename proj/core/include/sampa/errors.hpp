#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sampa {

/// Invalid configuration or hyperparameters. Raised before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite input or result in vector arithmetic or an oracle evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An optimizer state contract was violated (e.g. a stale gradient cache).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Failure inside the two-worker executor: worker exception or barrier timeout.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps any failure that happened while executing step `step` of a run.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace sampa
