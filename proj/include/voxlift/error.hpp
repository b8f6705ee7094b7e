#pragma once

#include <stdexcept>
#include <string>

namespace voxlift {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument did not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Filesystem access failed (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bytes were read but could not be decoded (bad magic, truncated payload, bad PNG).
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Transport or protocol failure talking to a remote model service.
class RemoteError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during optimization (non-finite gradient or parameter).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name alongside the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace voxlift
