#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace newsclip {

using SampleId = std::uint32_t;

enum class Modality : std::uint32_t {
  kClipText = 0,
  kClipImage = 1,
  kSbertText = 2,
  kPlaceImage = 3,
};
inline constexpr std::size_t kModalityCount = 4;
inline constexpr std::array<Modality, kModalityCount> kAllModalities = {
    Modality::kClipText, Modality::kClipImage, Modality::kSbertText, Modality::kPlaceImage};

enum class EntityLabel : std::uint8_t { kPerson, kGpe, kOrg, kLoc, kEvent, kDate, kOther };
inline constexpr std::array<EntityLabel, 7> kAllEntityLabels = {
    EntityLabel::kPerson, EntityLabel::kGpe,  EntityLabel::kOrg,  EntityLabel::kLoc,
    EntityLabel::kEvent,  EntityLabel::kDate, EntityLabel::kOther};

// The four retrieval strategies, one per threat scenario.
enum class Strategy : std::uint8_t {
  kSemClipTextImage = 0,
  kSemClipTextText = 1,
  kPersonSbertTextText = 2,
  kSceneResnetPlace = 3,
};
inline constexpr std::size_t kStrategyCount = 4;
inline constexpr std::array<Strategy, kStrategyCount> kAllStrategies = {
    Strategy::kSemClipTextImage, Strategy::kSemClipTextText, Strategy::kPersonSbertTextText,
    Strategy::kSceneResnetPlace};

enum class Partition : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };
inline constexpr std::size_t kPartitionCount = 3;
inline constexpr std::array<Partition, kPartitionCount> kAllPartitions = {
    Partition::kTrain, Partition::kVal, Partition::kTest};

enum class Label : std::uint8_t { kPristine = 0, kFalsified = 1 };

constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }
constexpr std::size_t index_of(Strategy s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index_of(Partition p) { return static_cast<std::size_t>(p); }

std::string_view to_string(Modality m);
std::string_view to_string(EntityLabel l);
std::string_view to_string(Strategy s);
std::string_view to_string(Partition p);
std::string_view to_string(Label l);

// File stem of an embedding file, e.g. "clip_text".
std::string_view file_stem(Modality m);

std::optional<EntityLabel> parse_entity_label(std::string_view s);
std::optional<Strategy> parse_strategy(std::string_view s);
std::optional<Partition> parse_partition(std::string_view s);
std::optional<Label> parse_label(std::string_view s);

}  // namespace newsclip
