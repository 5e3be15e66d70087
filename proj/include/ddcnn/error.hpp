#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddcnn {

/// Error classes raised by the library. Each class maps to one CLI exit code.
enum class Errc {
  FileNotFound,
  UnsupportedFormat,
  CorruptData,
  IoError,
  InvalidDimensions,
  OutOfBounds,
  InvalidMode,
  InvalidSpec,
  InvalidArgument,
  EmptyInput,
  ParseError,
  ShapeMismatch,
  DegenerateBatch,
  NonFinite,
  InvalidShape,
  OddDimensions,
  BadChannelCount,
  AlreadyFolded,
  UnpopulatedStats,
  FormatVersionMismatch,
  ChecksumMismatch,
  EmptyTrainSet,
  DivergenceDetected,
  TagMismatch,
  NoSpecialist,
  TooSmall,
  MissingRestoredFile,
  EmptyScores,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ddcnn
