#pragma once

#include <stdexcept>
#include <string>

namespace matchlearn {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values (non-finite numbers, out-of-range parameters).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent dimensions between related objects.
class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

/// Problem too large for an exhaustive routine.
class SizeError : public InputError {
 public:
  using InputError::InputError;
};

/// Malformed serialized input. The message carries line/field context.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchlearn
