#pragma once

#include <stdexcept>
#include <string>

namespace hdrunet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or image dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on call order or argument kind was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but mathematically unusable (empty, all-zero peak, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// File exists and is readable but its contents are not a valid encoding.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDepthError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace hdrunet
