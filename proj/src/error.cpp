#include "ddcnn/error.hpp"

namespace ddcnn {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptData: return "CorruptData";
    case Errc::IoError: return "IoError";
    case Errc::InvalidDimensions: return "InvalidDimensions";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::InvalidMode: return "InvalidMode";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ParseError: return "ParseError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DegenerateBatch: return "DegenerateBatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvalidShape: return "InvalidShape";
    case Errc::OddDimensions: return "OddDimensions";
    case Errc::BadChannelCount: return "BadChannelCount";
    case Errc::AlreadyFolded: return "AlreadyFolded";
    case Errc::UnpopulatedStats: return "UnpopulatedStats";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::EmptyTrainSet: return "EmptyTrainSet";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::TagMismatch: return "TagMismatch";
    case Errc::NoSpecialist: return "NoSpecialist";
    case Errc::TooSmall: return "TooSmall";
    case Errc::MissingRestoredFile: return "MissingRestoredFile";
    case Errc::EmptyScores: return "EmptyScores";
  }
  return "Unknown";
}

}  // namespace ddcnn
