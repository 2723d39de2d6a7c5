#pragma once

#include <stdexcept>
#include <string>

namespace resopf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario/checkpoint document: missing or ill-typed field.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Document is well formed but violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// N-1 removal would disconnect the grid or leave too little capacity.
class ContingencyRejected : public Error {
 public:
  using Error::Error;
};

/// Shape or dimension mismatch between cooperating values.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Features requested from a DC solution that is not optimal.
class FeatureError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_mismatch)
      : Error(what), last_mismatch_(last_mismatch) {}
  double last_mismatch() const noexcept { return last_mismatch_; }

 private:
  double last_mismatch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace resopf
