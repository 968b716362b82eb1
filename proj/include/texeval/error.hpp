#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace texeval {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class OovError : public Error {
 public:
  explicit OovError(const std::string& token)
      : Error("out-of-vocabulary token '" + token + "'"), token_(token) {}

  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// Raised when ingestion or training sees an empty or degenerate input.
class InputError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

/// Per-token log-prob file does not line up with the test corpus.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// A value that cannot be a log-probability (positive or non-finite).
class ValidityError : public Error {
 public:
  using Error::Error;
};

}  // namespace texeval
