#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "newsclip/feature_store.hpp"
#include "newsclip/types.hpp"

namespace newsclip {

enum class RejectReason : std::uint8_t {
  kWordCount,
  kEntityCount,
  kImageCorrupt,
  kTemporalGap,
  kEntityOverlap,
  kPersonOverlapRequired,
  kNoPersonEntity,
  kNoPersonBbox,
  kPersonRoleExcluded,
  kGenericCaption,
  kPlaceTooSimilar,
  kPersonEntityPresent,
  kSelfMatch,
};
inline constexpr std::size_t kRejectReasonCount = 13;

std::string_view to_string(RejectReason r);

struct FilterVerdict {
  bool accepted = true;
  std::vector<RejectReason> reasons;  // ascending enum order, no duplicates

  bool has(RejectReason r) const;
  bool operator==(const FilterVerdict&) const = default;
};

inline constexpr std::uint32_t kMinWords = 5;
inline constexpr std::uint32_t kMaxWords = 30;
inline constexpr std::size_t kMinEntities = 2;
inline constexpr std::int64_t kMinTemporalGapSeconds = 30LL * 86400;
inline constexpr double kMaxPlaceSimilarity = 0.9;  // strict upper bound, Person split

FilterVerdict check_pristine_quality(const SampleRecord& record);

// ASCII lower-casing; bytes >= 0x80 pass through unchanged.
std::string case_fold(std::string_view s);

struct OverlapKey {
  enum class Kind : std::uint8_t { kSurface, kLink };
  Kind kind;
  std::string key;                  // case-folded surface, or the linked id verbatim
  std::vector<EntityLabel> labels;  // labels seen on either side, ascending

  bool is_person_only() const;  // every label is PERSON
  bool has_non_person() const;  // some label is not PERSON
  bool operator==(const OverlapKey&) const = default;
};

// Union of case-folded surface matches and linked-id matches, ordered by
// (kind, key).
std::vector<OverlapKey> entity_overlap(const SampleRecord& a, const SampleRecord& b);

// Reasons that depend on a single record under a given strategy (Person
// extras, Scene's no-PERSON rule). Empty for the Semantics strategies.
std::vector<RejectReason> record_rejections(const SampleRecord& record, Strategy strategy);

// Pairwise eligibility of the falsified pair (candidate image, query caption).
// Throws Error(kUnknownId) when the Person place lookup hits an unknown id.
FilterVerdict check_pair(const SampleRecord& query, const SampleRecord& candidate, Strategy strategy,
                         const FeatureStore& store);

// Same decision as check_pair(...).accepted, with entity keys interned and
// record-level predicates cached once per store so it can sit in the inner
// matching loop.
class PairFilter {
 public:
  PairFilter(const FeatureStore& store, Strategy strategy);

  bool accepts(SampleId query, SampleId candidate) const;
  bool record_eligible(SampleId id) const { return eligible_[id] != 0; }

 private:
  struct Key {
    std::uint32_t id;
    std::uint8_t label_mask;
  };

  const FeatureStore& store_;
  Strategy strategy_;
  std::vector<std::uint8_t> eligible_;
  // Per sample, sorted by id. Surface and link ids share one numbering space.
  std::vector<std::vector<Key>> keys_;
};

}  // namespace newsclip
