#include "semilab/error.hpp"

namespace semilab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Accuracy: return "accuracy error";
    case ErrorKind::Growth: return "growth error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Unsupported: return "unsupported";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace semilab
