#pragma once

#include <stdexcept>
#include <string>

namespace semilab {

enum class ErrorKind {
  Domain,
  Accuracy,
  Growth,
  Degenerate,
  Range,
  Precondition,
  Usage,
  Io,
  Unsupported,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace semilab
