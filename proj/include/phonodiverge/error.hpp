#pragma once

#include <stdexcept>
#include <string>

namespace phonodiverge {

// Bad input: malformed files, invariant violations, out-of-range settings.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parse failure with the 1-based line it was detected on.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, int line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

  /// Same error with "<source>: " prepended to the message.
  ParseError in(const std::string& source) const { return ParseError(source + ": " + what(), line_, 0); }

 private:
  ParseError(const std::string& full, int line, int) : ValidationError(full), line_(line) {}
  int line_;
};

// Numerical breakdown (Cholesky failure, KLD below the clamp tolerance).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phonodiverge
