#include "rtp/error.hpp"

namespace rtp {

const char* errorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::PoleGuard: return "pole-guard";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Verification: return "verification";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

int exitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Verification: return 3;
    case ErrorKind::NonConvergence:
    case ErrorKind::Numeric: return 4;
    default: return 2;
  }
}

}  // namespace rtp
