#include "nnlsgd/errors.hpp"

namespace nnlsgd {

namespace {

std::string format_parse_message(std::size_t line, const std::string& field,
                                 const std::string& what) {
  std::string msg = "parse error";
  if (line > 0) msg += " at line " + std::to_string(line);
  if (!field.empty()) msg += " (field '" + field + "')";
  msg += ": " + what;
  return msg;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::string field,
                       const std::string& what)
    : Error(format_parse_message(line, field, what)),
      line_(line),
      field_(std::move(field)) {}

void require_dims(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected length " +
                         std::to_string(expected) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace nnlsgd
