#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nnlsgd {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (e.g. x.size() != A.cols()).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A loaded document is structurally valid but semantically inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed text document. `line` is 1-based, 0 when not attributable.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what);

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Throws DimensionError with a message naming both extents.
void require_dims(std::size_t got, std::size_t expected, const char* what);

}  // namespace nnlsgd
