#pragma once

#include <stdexcept>
#include <string>

namespace verbreg {

// Broad failure categories; the CLI maps each one to its own exit code.
enum class ErrorKind {
  input,       // unreadable or malformed input file
  config,      // invalid configuration or arguments
  precondition,  // an operation was called outside its domain
  degenerate,  // a statistic is undefined for the given data (zero variance, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::config: return "config";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "unknown";
}

}  // namespace verbreg
