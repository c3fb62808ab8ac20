#pragma once

#include <stdexcept>
#include <string>

namespace heom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or inconsistent inputs.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to reach its declared tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Resource estimate above the configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace heom
