#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace wmprobe {

enum class ErrorKind {
  Config,
  Io,
  Format,
  NonFiniteInput,
  MismatchedReps,
  MismatchedImages,
  EmptyClass,
  OutOfRange,
  LengthMismatch,
  DegenerateData,
  NonFiniteLoss,
  TextTooLarge,
  FontCoverage,
};

const char* to_string(ErrorKind kind);

/// Process exit code for an error kind: 2 config, 3 data/format, 4 numerical.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& message) : Error(K, message) {}
};

using ConfigError = KindError<ErrorKind::Config>;
using IoError = KindError<ErrorKind::Io>;
using NonFiniteInput = KindError<ErrorKind::NonFiniteInput>;
using MismatchedReps = KindError<ErrorKind::MismatchedReps>;
using MismatchedImages = KindError<ErrorKind::MismatchedImages>;
using EmptyClass = KindError<ErrorKind::EmptyClass>;
using OutOfRange = KindError<ErrorKind::OutOfRange>;
using LengthMismatch = KindError<ErrorKind::LengthMismatch>;
using DegenerateData = KindError<ErrorKind::DegenerateData>;
using NonFiniteLoss = KindError<ErrorKind::NonFiniteLoss>;
using TextTooLarge = KindError<ErrorKind::TextTooLarge>;
using FontCoverage = KindError<ErrorKind::FontCoverage>;

/// Malformed dump or manifest. `offset` is the byte offset of the first bad
/// field when the problem is located in the binary payload.
class FormatError : public Error {
 public:
  FormatError(std::string file, std::optional<std::uint64_t> offset,
              const std::string& what);

  const std::string& file() const noexcept { return file_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace wmprobe
