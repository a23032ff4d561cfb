#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peduncle {

enum class ErrorCode {
  EmptyInput,
  InsufficientPoints,
  EmptyHistogram,
  InvalidDescriptor,
  DegenerateTraining,
  InvalidInput,
  ShapeError,
  InputTooSmall,
  NoPepperFound,
  RoiOutOfImage,
  EmptyProjection,
  NoPeduncleFound,
  EmptyEvaluation,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::DegenerateTraining: return "DegenerateTraining";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InputTooSmall: return "InputTooSmall";
    case ErrorCode::NoPepperFound: return "NoPepperFound";
    case ErrorCode::RoiOutOfImage: return "RoiOutOfImage";
    case ErrorCode::EmptyProjection: return "EmptyProjection";
    case ErrorCode::NoPeduncleFound: return "NoPeduncleFound";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace peduncle
