#pragma once

#include <stdexcept>
#include <string>

namespace saht {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An index (state, action, teammate slot) fell outside its declared range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters, malformed files, or mismatched signatures.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough data to perform the requested estimate.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// No library type assigns positive likelihood to the observed teammate actions.
class TypeInferenceFailure : public Error {
 public:
  using Error::Error;
};

/// A behavior policy assigns zero probability to an action that was logged.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

/// A precondition of a numerical routine was not met by its input batch.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A cooperative deadline expired.
class Timeout : public Error {
 public:
  using Error::Error;
};

}  // namespace saht
