#pragma once

#include <stdexcept>
#include <string>

namespace eelabel {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidDepth,
  kDimensionMismatch,
  kAttributeMismatch,
  kMissingAttribute,
  kInsufficientPoints,
  kEmptyIndex,
  kParse,
  kIndexOutOfRange,
  kEmptyMesh,
  kDegenerateConfiguration,
  kEmptyFrame,
  kTooShortTrack,
  kConfig,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kInvalidDepth: return "invalid depth";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kAttributeMismatch: return "attribute mismatch";
    case ErrorKind::kMissingAttribute: return "missing attribute";
    case ErrorKind::kInsufficientPoints: return "insufficient points";
    case ErrorKind::kEmptyIndex: return "empty index";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIndexOutOfRange: return "index out of range";
    case ErrorKind::kEmptyMesh: return "empty mesh";
    case ErrorKind::kDegenerateConfiguration: return "degenerate configuration";
    case ErrorKind::kEmptyFrame: return "empty frame";
    case ErrorKind::kTooShortTrack: return "too-short track";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated without a class hierarchy per failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix, for re-wrapping with context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace eelabel
