#pragma once

#include <stdexcept>
#include <string>

namespace eegdt {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, inconsistent shapes, bad configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// NaN/Inf appeared during a numerical procedure (training divergence etc.).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures (cannot open, cannot write).
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary container. Subclasses distinguish the failure mode.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace eegdt
