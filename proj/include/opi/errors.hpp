#pragma once

#include <stdexcept>
#include <string>

namespace opi {

/// Precondition violated by the caller (bad dimension, out-of-range knob, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared inside a numerical update. Always fatal for the run.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An artifact could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV rows, config lines, trace files).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace opi
