#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgr {

// Root of every error the engine raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownBackend : public Error {
 public:
  using Error::Error;
};

class TokenizationError : public Error {
 public:
  using Error::Error;
};

class ContextOverflow : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure talking to a backend. Retriable: requests are pure reads.
class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  /// HTTP status when the failure came from a response, 0 otherwise.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class InvalidProfile : public Error {
 public:
  using Error::Error;
};

/// Errors tied to a position in a line-oriented input file.
class LineError : public Error {
 public:
  LineError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TraceFormatError : public LineError {
 public:
  using LineError::LineError;
};

class DatasetError : public LineError {
 public:
  using LineError::LineError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SweepUnsupported : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlotDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgr
