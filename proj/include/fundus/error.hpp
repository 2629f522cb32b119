#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fundus {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptImage,
  IoError,
  WrongChannelCount,
  IndexOutOfRange,
  DimensionMismatch,
  UnsupportedConversion,
  ZeroDimension,
  ImageTooSmall,
  EmptyROI,
  TileTooSmall,
  InvalidParameter,
  BadPatchSize,
  DegenerateImage,
  LengthMismatch,
  ClassOutOfRange,
  EmptyInput,
  ManifestInvalid,
  PairingViolation,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::WrongChannelCount: return "WrongChannelCount";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedConversion: return "UnsupportedConversion";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EmptyROI: return "EmptyROI";
    case ErrorCode::TileTooSmall: return "TileTooSmall";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::BadPatchSize: return "BadPatchSize";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::PairingViolation: return "PairingViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fundus
