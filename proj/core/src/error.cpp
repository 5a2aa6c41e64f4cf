#include "wfsel/error.hpp"

namespace wfsel {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kIterationCap: return "iteration-cap";
    case ErrorKind::kAttemptsExhausted: return "attempts-exhausted";
    case ErrorKind::kDegenerateBank: return "degenerate-bank";
    case ErrorKind::kMissingBank: return "missing-bank";
    case ErrorKind::kChecksumMismatch: return "checksum-mismatch";
    case ErrorKind::kVersionMismatch: return "version-mismatch";
    case ErrorKind::kKeyMismatch: return "key-mismatch";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace wfsel
