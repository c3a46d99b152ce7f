#pragma once

#include <stdexcept>
#include <string>

namespace t2f {

// Violated precondition or domain contract: bad shapes, out-of-range values,
// malformed arguments. Maps to CLI exit code 1.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text. Carries a 1-based line number when one is known.
// Maps to CLI exit code 1.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Filesystem trouble: missing files, short reads, failed writes.
// Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace t2f
