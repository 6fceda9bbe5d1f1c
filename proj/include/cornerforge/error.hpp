#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cornerforge {

enum class ErrorCode {
  RegionOutOfBounds,
  DimensionMismatch,
  EmptyMask,
  BackgroundTooSmall,
  UnknownClass,
  EmptyClassName,
  WrongRequestKind,
  BackendUnreachable,
  BackendRejected,
  ProtocolError,
  GenerationTimeout,
  InsufficientBackgrounds,
  EmptyPool,
  MissingImage,
  UnknownClassId,
  ClassSetMismatch,
  ConfigInvalid,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::BackgroundTooSmall: return "BackgroundTooSmall";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::EmptyClassName: return "EmptyClassName";
    case ErrorCode::WrongRequestKind: return "WrongRequestKind";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::BackendRejected: return "BackendRejected";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::GenerationTimeout: return "GenerationTimeout";
    case ErrorCode::InsufficientBackgrounds: return "InsufficientBackgrounds";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::UnknownClassId: return "UnknownClassId";
    case ErrorCode::ClassSetMismatch: return "ClassSetMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cornerforge
