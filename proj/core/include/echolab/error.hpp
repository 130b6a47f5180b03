#pragma once

#include <stdexcept>
#include <string>

namespace echolab {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnknownUnit : public Error {
 public:
  explicit UnknownUnit(const std::string& tag) : Error("unknown unit tag '" + tag + "'") {}
};

class UnknownModel : public Error {
 public:
  explicit UnknownModel(const std::string& id) : Error("unknown model '" + id + "'") {}
};

/// Malformed input text; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace echolab
