#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fvp {

enum class ErrorKind {
  kDomain,   // non-finite or out-of-range numeric input
  kShape,    // dimension mismatch between operands
  kFormat,   // malformed or truncated file
  kIo,       // filesystem failure
  kConfig,   // invalid configuration or CLI usage
  kState,    // operation not valid in the object's current state
};

std::string_view to_string(ErrorKind kind);

/// All library failures are reported through this exception type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace fvp
