#include "newsclip/types.hpp"

#include "newsclip/error.hpp"

namespace newsclip {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMagicMismatch: return "MagicMismatch";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kManifestParse: return "ManifestParse";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kDuplicateCaption: return "DuplicateCaption";
    case ErrorCode::kInsufficientRecords: return "InsufficientRecords";
    case ErrorCode::kUnknownReport: return "UnknownReport";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kClipText: return "CLIP_TEXT";
    case Modality::kClipImage: return "CLIP_IMAGE";
    case Modality::kSbertText: return "SBERT_TEXT";
    case Modality::kPlaceImage: return "PLACE_IMAGE";
  }
  return "?";
}

std::string_view file_stem(Modality m) {
  switch (m) {
    case Modality::kClipText: return "clip_text";
    case Modality::kClipImage: return "clip_image";
    case Modality::kSbertText: return "sbert_text";
    case Modality::kPlaceImage: return "place_image";
  }
  return "?";
}

namespace {
constexpr std::array<std::string_view, 7> kLabelNames = {"PERSON", "GPE",   "ORG",  "LOC",
                                                         "EVENT",  "DATE", "OTHER"};
constexpr std::array<std::string_view, kStrategyCount> kStrategyNames = {
    "sem_clip_text_image", "sem_clip_text_text", "person_sbert_text_text", "scene_resnet_place"};
constexpr std::array<std::string_view, kPartitionCount> kPartitionNames = {"train", "val", "test"};
constexpr std::array<std::string_view, 2> kLabelValueNames = {"pristine", "falsified"};
}  // namespace

std::string_view to_string(EntityLabel l) { return kLabelNames[static_cast<std::size_t>(l)]; }
std::string_view to_string(Strategy s) { return kStrategyNames[index_of(s)]; }
std::string_view to_string(Partition p) { return kPartitionNames[index_of(p)]; }
std::string_view to_string(Label l) { return kLabelValueNames[static_cast<std::size_t>(l)]; }

std::optional<EntityLabel> parse_entity_label(std::string_view s) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == s) return static_cast<EntityLabel>(i);
  }
  return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
    if (kStrategyNames[i] == s) return static_cast<Strategy>(i);
  }
  return std::nullopt;
}

std::optional<Partition> parse_partition(std::string_view s) {
  for (std::size_t i = 0; i < kPartitionNames.size(); ++i) {
    if (kPartitionNames[i] == s) return static_cast<Partition>(i);
  }
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  for (std::size_t i = 0; i < kLabelValueNames.size(); ++i) {
    if (kLabelValueNames[i] == s) return static_cast<Label>(i);
  }
  return std::nullopt;
}

}  // namespace newsclip
