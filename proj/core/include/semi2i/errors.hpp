#pragma once

#include <stdexcept>
#include <string>

namespace semi2i {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong shapes, empty tensors, out-of-range ids.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A configuration value outside its documented domain.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Checkpoint missing required entries, wrong magic or unsupported version.
class InvalidCheckpoint : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but degenerate for the requested transform.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// File-system or codec failure while reading/writing data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during optimization.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace semi2i
