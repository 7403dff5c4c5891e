#pragma once

#include <stdexcept>
#include <string>

namespace vmr {

// Bad input data, config, or arguments. CLI exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};

// Remote narrator failure after bounded retries. CLI exit code 3.
struct NarrationError : std::runtime_error {
  double timestamp;
  NarrationError(const std::string& msg, double t)
      : std::runtime_error(msg), timestamp(t) {}
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vmr
