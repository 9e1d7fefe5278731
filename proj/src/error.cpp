#include "compsearch/error.hpp"

namespace compsearch {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyGallery: return "EmptyGallery";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::EmptyAttribute: return "EmptyAttribute";
    case Errc::IllegalCharacter: return "IllegalCharacter";
    case Errc::Io: return "Io";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::TokenOutOfRange: return "TokenOutOfRange";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownTool: return "UnknownTool";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::ToolFailure: return "ToolFailure";
    case Errc::BudgetTooSmall: return "BudgetTooSmall";
    case Errc::EmptyResults: return "EmptyResults";
    case Errc::LlmUnavailable: return "LlmUnavailable";
    case Errc::VqaUnavailable: return "VqaUnavailable";
    case Errc::EmbedderUnavailable: return "EmbedderUnavailable";
    case Errc::CorruptState: return "CorruptState";
    case Errc::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace compsearch
