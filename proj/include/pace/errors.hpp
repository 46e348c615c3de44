#pragma once

#include <stdexcept>
#include <string>

namespace pace {

// Base class for recoverable failures surfaced by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (run config, checker spec, dataset).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure that survived the retry policy.
class RetryableError : public BackendError {
 public:
  RetryableError(const std::string& what, long long billed_input_units, int attempts)
      : BackendError(what), billed_input_units_(billed_input_units), attempts_(attempts) {}

  long long billed_input_units() const { return billed_input_units_; }
  int attempts() const { return attempts_; }

 private:
  long long billed_input_units_;
  int attempts_;
};

// The endpoint answered, but not with a well-formed chat completion.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ScriptMissError : public BackendError {
 public:
  explicit ScriptMissError(std::string digest)
      : BackendError("script miss for request digest " + digest), digest_(std::move(digest)) {}

  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

}  // namespace pace
