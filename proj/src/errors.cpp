#include "wmprobe/errors.hpp"

namespace wmprobe {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::MismatchedReps: return "MismatchedReps";
    case ErrorKind::MismatchedImages: return "MismatchedImages";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::TextTooLarge: return "TextTooLarge";
    case ErrorKind::FontCoverage: return "FontCoverage";
  }
  return "Error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::OutOfRange:
    case ErrorKind::TextTooLarge:
    case ErrorKind::FontCoverage:
      return 2;
    case ErrorKind::NonFiniteLoss:
      return 4;
    default:
      return 3;
  }
}

namespace {
std::string format_message(const std::string& file,
                           std::optional<std::uint64_t> offset,
                           const std::string& what) {
  std::string msg = file;
  if (offset) msg += " @ byte " + std::to_string(*offset);
  msg += ": " + what;
  return msg;
}
}  // namespace

FormatError::FormatError(std::string file, std::optional<std::uint64_t> offset,
                         const std::string& what)
    : Error(ErrorKind::Format, format_message(file, offset, what)),
      file_(std::move(file)),
      offset_(offset) {}

}  // namespace wmprobe
