#pragma once

#include <stdexcept>
#include <string>

namespace lfba {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this; the subclasses exist for tests and for
// the gateway, which maps them onto HTTP status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (bad bit string, label out of
// range, dimension mismatch, degenerate split...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible file content.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Event carries a timestamp older than the last one processed.
class StaleEventError : public Error {
 public:
  using Error::Error;
};

// Request is well formed but cannot be served in the current state, such as
// training without any stored samples.
class StateError : public Error {
 public:
  using Error::Error;
};

// Remote predictor did not answer in time, or answered garbage.
class PredictorUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace lfba
