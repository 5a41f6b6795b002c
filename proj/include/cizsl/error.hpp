#pragma once

#include <stdexcept>
#include <string>

namespace cizsl {

enum class ErrorKind {
  InvalidInput,
  InvalidState,
  InvalidConfig,
  InvalidSplit,
  OracleFailure,
  DivergenceUndefined,
  TrainingDiverged,
  LoadError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// the CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::InvalidSplit: return "invalid-split";
    case ErrorKind::OracleFailure: return "oracle-failure";
    case ErrorKind::DivergenceUndefined: return "divergence-undefined";
    case ErrorKind::TrainingDiverged: return "training-diverged";
    case ErrorKind::LoadError: return "load-error";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace cizsl
