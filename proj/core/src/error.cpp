#include "fvp/error.hpp"

namespace fvp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kState: return "state";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace fvp
