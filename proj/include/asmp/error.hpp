#pragma once

#include <stdexcept>
#include <string>

namespace asmp {

/// Failure categories, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
  kValidation = 1,
  kMissingInput = 2,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorKind::kValidation, what);
}

[[noreturn]] inline void fail_missing(const std::string& what) {
  throw Error(ErrorKind::kMissingInput, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(what);
}

}  // namespace asmp
