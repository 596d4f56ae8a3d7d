#pragma once

#include <stdexcept>
#include <string>

namespace dreampipe {

// Broad failure classes; the CLI maps them onto process exit codes.
enum class ErrorKind {
  InvalidArgument,
  Io,
  Format,
  Config,
  Backend,
  Contract,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace dreampipe
