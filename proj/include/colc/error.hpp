#pragma once

#include <stdexcept>
#include <string>

namespace colc {

/// Base class for every error raised by the library. `kind()` is a short
/// stable token used in machine-readable diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid argument value (negative sigma, ratio out of range, bad dims).
class ParameterError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parameter"; }
};

/// Input data that violates a precondition (empty cloud, unknown agent).
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input"; }
};

class GenerationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "generation"; }
};

class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// File could not be opened, read, written, or has a malformed header.
class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace colc
