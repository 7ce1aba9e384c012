#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fewgan {

// Bad shapes, ranges or option values supplied by the caller.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation was requested on a model or prior that is not ready for it.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptCheckpoint : public IoError {
 public:
  using IoError::IoError;
};

class UnsupportedVersion : public IoError {
 public:
  using IoError::IoError;
};

// Prior weights were trained against a different codebook than the one loaded.
class CodebookMismatch : public IoError {
 public:
  using IoError::IoError;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int scale, int64_t step, const std::string& what)
      : std::runtime_error("training diverged at scale " + std::to_string(scale) + ", step " +
                           std::to_string(step) + ": " + what),
        scale_(scale),
        step_(step) {}

  int scale() const { return scale_; }
  int64_t step() const { return step_; }

 private:
  int scale_;
  int64_t step_;
};

}  // namespace fewgan
