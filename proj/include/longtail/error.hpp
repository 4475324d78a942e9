#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace longtail {

// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed serialized input. line() is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Two artifacts built against different vocabularies were combined.
class VocabMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace longtail
