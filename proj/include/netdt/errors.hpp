#pragma once

#include <stdexcept>
#include <string>

namespace netdt {

// Every error raised by the library derives from Error. The CLI maps the
// categories below onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lookup of an id that does not exist in the sample.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed sample or file (exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during a computation (exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or inconsistent artifacts (exit code 4).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor/parameter dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class AugmentationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedPolicyError : public Error {
 public:
  using Error::Error;
};

}  // namespace netdt
