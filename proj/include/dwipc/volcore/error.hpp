#pragma once

#include <stdexcept>
#include <string>

namespace dwipc {

enum class ErrorKind {
  InvalidArgument,
  DimsMismatch,
  FileNotFound,
  InvalidHeader,
  TruncatedPayload,
  InvalidData,
  CountMismatch,
  NonUnitDirection,
  Configuration,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DimsMismatch: return "dims-mismatch";
    case ErrorKind::FileNotFound: return "file-not-found";
    case ErrorKind::InvalidHeader: return "invalid-header";
    case ErrorKind::TruncatedPayload: return "truncated-payload";
    case ErrorKind::InvalidData: return "invalid-data";
    case ErrorKind::CountMismatch: return "count-mismatch";
    case ErrorKind::NonUnitDirection: return "non-unit-direction";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dwipc
