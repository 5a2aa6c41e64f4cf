#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wfsel {

enum class ErrorKind {
  kDomain,
  kIterationCap,
  kAttemptsExhausted,
  kDegenerateBank,
  kMissingBank,
  kChecksumMismatch,
  kVersionMismatch,
  kKeyMismatch,
  kConfig,
  kIo,
  kParse,
};

// Stable identifier used in error reports, e.g. "missing-bank".
std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace wfsel
