#pragma once

#include <stdexcept>
#include <string>

namespace stylebc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or vector dimensions do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in parameters, activations or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File opened fine but its contents are not what we expect (magic, version, truncation).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class EpisodeOverError : public Error {
 public:
  using Error::Error;
};

class LabelRangeError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace stylebc
