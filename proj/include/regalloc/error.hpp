#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace regalloc {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error(format(line, field, what)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(std::size_t line, const std::string& field, const std::string& what) {
    std::string out = "parse error";
    if (line != 0) out += " at line " + std::to_string(line);
    if (!field.empty()) out += " (" + field + ")";
    return out + ": " + what;
  }

  std::size_t line_;
  std::string field_;
};

/// Well-formed input that violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class InterpretError : public Error {
 public:
  enum class Kind { FuelExhausted, DivisionByZero, UnwrittenRead, Malformed };

  InterpretError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A transform or query was asked to do something its preconditions forbid.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace regalloc
