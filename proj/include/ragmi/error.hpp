#pragma once

#include <stdexcept>
#include <string>

namespace ragmi {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1; usage errors are handled separately by the argument parser.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
  using Error::Error;
};

class ConfigError : public Error {
  using Error::Error;
};

class ArgumentError : public Error {
  using Error::Error;
};

class AlignmentError : public Error {
  using Error::Error;
};

/// The completion endpoint does not return per-token log-probabilities.
class CapabilityError : public Error {
  using Error::Error;
};

class TransportError : public Error {
  using Error::Error;
};

class CacheError : public Error {
  using Error::Error;
};

class EstimatorError : public Error {
  using Error::Error;
};

class ConvergenceError : public Error {
  using Error::Error;
};

}  // namespace ragmi
