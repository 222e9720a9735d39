#pragma once

#include <stdexcept>
#include <string>

namespace ehrcheck {

/// Malformed input text (CSV, JSONL, plan JSON, backend answers).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  ParseError(const std::string& what, long line) : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  /// 0 when the error is not tied to a line.
  long line() const { return line_; }

 private:
  long line_ = 0;
};

/// Invalid run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ehrcheck
