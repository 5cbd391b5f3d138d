#pragma once

#include <stdexcept>
#include <string>

namespace perflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point was evaluated outside the model's domain box.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An argument was outside its documented range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed numerical procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NotAnEquilibriumError : public Error {
 public:
  using Error::Error;
};

class NotAMinimizerError : public Error {
 public:
  using Error::Error;
};

class InvalidCertificateError : public Error {
 public:
  using Error::Error;
};

class MissingConstantError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace perflow
