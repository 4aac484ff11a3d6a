#pragma once

#include <stdexcept>
#include <string>

namespace counterclr {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kData = 3,
  kNumerical = 4,
  kIo = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Invalid argument or violated precondition.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ExitCode::kUsage, what) {}
};

// Malformed input data; `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(ExitCode::kData,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class RangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DuplicateKeyError : public ParseError {
 public:
  using ParseError::ParseError;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::kIo, what) {}
};

}  // namespace counterclr
