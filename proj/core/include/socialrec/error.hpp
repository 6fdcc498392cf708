#pragma once

#include <stdexcept>
#include <string>

namespace socialrec {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated an operation's precondition (shape, range, domain).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A configuration value is missing, malformed, or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An input file is missing or malformed.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace socialrec
