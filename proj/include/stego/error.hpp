#pragma once

#include <stdexcept>
#include <string>

namespace stego {

// Categories line up with the CLI exit-code contract (2 usage, 3 data, 4 numeric).
enum class ErrorKind {
  invalid_argument,
  data,
  numeric,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace stego
