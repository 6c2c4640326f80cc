#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rationale {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not conform to its declared format.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A domain invariant would be violated (duplicate id, dangling edge, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A remote backend could not be reached or returned a transport-level failure.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A backend replied, but the reply breaks the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Caller misuse of the command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace rationale
