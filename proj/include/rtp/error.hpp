#pragma once

#include <stdexcept>
#include <string>

namespace rtp {

enum class ErrorKind {
  InvalidParameter,
  Domain,
  PoleGuard,
  NonConvergence,
  Numeric,
  Verification,
  Config,
  Io,
};

const char* errorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) fail(kind, message);
}

// Exit status used by the command line runner.
int exitCodeFor(ErrorKind kind);

}  // namespace rtp
