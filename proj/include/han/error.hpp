#pragma once

#include <stdexcept>
#include <string>

namespace han {

// Base of every error the library throws. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A NaN/Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A sequence with zero frames was supplied or decoded.
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

// Invalid user-facing configuration (bad rate, unknown key, T < sub-action length, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A trace or gradient set does not belong to the model it is used with.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Binary container decode failures. Each corruption mode has its own kind so
// tests and tooling can tell them apart without string matching.
enum class FormatErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedHeader,
  kTruncatedPayload,
  kTrailingBytes,
  kBadStreamCount,
  kBadDtype,
  kZeroDimension,
  kEmptySequence,
  kConfigMismatch,
  kShapeInconsistent,
  kNonFinitePayload,
};

const char* to_string(FormatErrorKind kind);

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace han
