#include "newsclip/constraints.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "newsclip/error.hpp"
#include "newsclip/scoring.hpp"

namespace newsclip {

namespace {

constexpr std::uint8_t kPersonBit = 1u << static_cast<unsigned>(EntityLabel::kPerson);

std::uint8_t label_bit(EntityLabel l) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l)); }

void finish(FilterVerdict& v) {
  std::sort(v.reasons.begin(), v.reasons.end());
  v.reasons.erase(std::unique(v.reasons.begin(), v.reasons.end()), v.reasons.end());
  v.accepted = v.reasons.empty();
}

std::int64_t abs_gap(std::int64_t a, std::int64_t b) { return a > b ? a - b : b - a; }

double place_similarity(const FeatureStore& store, SampleId a, SampleId b) {
  return strategy_score(store, Strategy::kSceneResnetPlace, a, b);
}

}  // namespace

std::string_view to_string(RejectReason r) {
  static constexpr std::array<std::string_view, kRejectReasonCount> kNames = {
      "WORD_COUNT",       "ENTITY_COUNT",     "IMAGE_CORRUPT",     "TEMPORAL_GAP",
      "ENTITY_OVERLAP",   "PERSON_OVERLAP_REQUIRED", "NO_PERSON_ENTITY", "NO_PERSON_BBOX",
      "PERSON_ROLE_EXCLUDED", "GENERIC_CAPTION", "PLACE_TOO_SIMILAR", "PERSON_ENTITY_PRESENT",
      "SELF_MATCH"};
  return kNames[static_cast<std::size_t>(r)];
}

bool FilterVerdict::has(RejectReason r) const {
  return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

FilterVerdict check_pristine_quality(const SampleRecord& record) {
  FilterVerdict v;
  if (record.word_count < kMinWords || record.word_count > kMaxWords) v.reasons.push_back(RejectReason::kWordCount);
  if (record.named_entities.size() < kMinEntities) v.reasons.push_back(RejectReason::kEntityCount);
  if (!record.image_ok) v.reasons.push_back(RejectReason::kImageCorrupt);
  finish(v);
  return v;
}

std::string case_fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool OverlapKey::is_person_only() const {
  return !labels.empty() &&
         std::all_of(labels.begin(), labels.end(), [](EntityLabel l) { return l == EntityLabel::kPerson; });
}

bool OverlapKey::has_non_person() const {
  return std::any_of(labels.begin(), labels.end(), [](EntityLabel l) { return l != EntityLabel::kPerson; });
}

std::vector<OverlapKey> entity_overlap(const SampleRecord& a, const SampleRecord& b) {
  using KeyId = std::pair<OverlapKey::Kind, std::string>;
  auto collect = [](const SampleRecord& r) {
    std::map<KeyId, std::uint8_t> out;
    for (const auto& m : r.named_entities) {
      out[{OverlapKey::Kind::kSurface, case_fold(m.surface)}] |= label_bit(m.label);
      if (m.linked_id) out[{OverlapKey::Kind::kLink, *m.linked_id}] |= label_bit(m.label);
    }
    return out;
  };
  const auto ka = collect(a);
  const auto kb = collect(b);

  std::vector<OverlapKey> result;
  for (const auto& [key, mask_a] : ka) {
    const auto it = kb.find(key);
    if (it == kb.end()) continue;
    const std::uint8_t mask = mask_a | it->second;
    OverlapKey ok{key.first, key.second, {}};
    for (unsigned bit = 0; bit < 7; ++bit) {
      if (mask & (1u << bit)) ok.labels.push_back(static_cast<EntityLabel>(bit));
    }
    result.push_back(std::move(ok));
  }
  return result;
}

std::vector<RejectReason> record_rejections(const SampleRecord& r, Strategy strategy) {
  std::vector<RejectReason> out;
  if (strategy == Strategy::kPersonSbertTextText) {
    if (!r.has_person_entity()) out.push_back(RejectReason::kNoPersonEntity);
    if (!r.has_person_bbox) out.push_back(RejectReason::kNoPersonBbox);
    if (r.person_role_excluded) out.push_back(RejectReason::kPersonRoleExcluded);
    if (r.is_generic_caption) out.push_back(RejectReason::kGenericCaption);
  } else if (strategy == Strategy::kSceneResnetPlace) {
    if (r.has_person_entity()) out.push_back(RejectReason::kPersonEntityPresent);
  }
  return out;
}

FilterVerdict check_pair(const SampleRecord& query, const SampleRecord& candidate, Strategy strategy,
                         const FeatureStore& store) {
  FilterVerdict v;
  if (candidate.sample_id == query.sample_id) v.reasons.push_back(RejectReason::kSelfMatch);
  if (abs_gap(query.timestamp, candidate.timestamp) < kMinTemporalGapSeconds) {
    v.reasons.push_back(RejectReason::kTemporalGap);
  }

  const auto overlap = entity_overlap(query, candidate);
  if (strategy == Strategy::kPersonSbertTextText) {
    const bool person = std::any_of(overlap.begin(), overlap.end(), [](const auto& k) { return k.is_person_only(); });
    const bool other = std::any_of(overlap.begin(), overlap.end(), [](const auto& k) { return k.has_non_person(); });
    if (!person) v.reasons.push_back(RejectReason::kPersonOverlapRequired);
    if (other) v.reasons.push_back(RejectReason::kEntityOverlap);
  } else if (!overlap.empty()) {
    v.reasons.push_back(RejectReason::kEntityOverlap);
  }

  for (const auto* r : {&query, &candidate}) {
    const auto extra = record_rejections(*r, strategy);
    v.reasons.insert(v.reasons.end(), extra.begin(), extra.end());
  }
  if (strategy == Strategy::kPersonSbertTextText &&
      !(place_similarity(store, query.sample_id, candidate.sample_id) < kMaxPlaceSimilarity)) {
    v.reasons.push_back(RejectReason::kPlaceTooSimilar);
  }
  finish(v);
  return v;
}

PairFilter::PairFilter(const FeatureStore& store, Strategy strategy)
    : store_(store), strategy_(strategy), eligible_(store.size()), keys_(store.size()) {
  std::unordered_map<std::string, std::uint32_t> surfaces;
  std::unordered_map<std::string, std::uint32_t> links;
  std::uint32_t next = 0;
  auto intern = [&next](std::unordered_map<std::string, std::uint32_t>& table, std::string key) {
    const auto [it, inserted] = table.try_emplace(std::move(key), next);
    if (inserted) ++next;
    return it->second;
  };

  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& r = store.manifest()[i];
    eligible_[i] = record_rejections(r, strategy).empty();
    auto& keys = keys_[i];
    for (const auto& m : r.named_entities) {
      keys.push_back({intern(surfaces, case_fold(m.surface)), label_bit(m.label)});
      if (m.linked_id) keys.push_back({intern(links, *m.linked_id), label_bit(m.label)});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) { return a.id < b.id; });
    // Merge duplicate keys within one record.
    std::size_t out = 0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (out > 0 && keys[out - 1].id == keys[k].id) {
        keys[out - 1].label_mask |= keys[k].label_mask;
      } else {
        keys[out++] = keys[k];
      }
    }
    keys.resize(out);
  }
}

bool PairFilter::accepts(SampleId query, SampleId candidate) const {
  if (query >= eligible_.size() || candidate >= eligible_.size()) {
    throw Error(ErrorCode::kUnknownId, "pair (" + std::to_string(query) + ", " + std::to_string(candidate) + ")");
  }
  if (query == candidate) return false;
  if (!eligible_[query] || !eligible_[candidate]) return false;
  const auto& mq = store_.manifest();
  if (abs_gap(mq[query].timestamp, mq[candidate].timestamp) < kMinTemporalGapSeconds) return false;

  const bool person_split = strategy_ == Strategy::kPersonSbertTextText;
  bool person_overlap = false;
  const auto& a = keys_[query];
  const auto& b = keys_[candidate];
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].id < b[j].id) {
      ++i;
    } else if (b[j].id < a[i].id) {
      ++j;
    } else {
      const std::uint8_t mask = a[i].label_mask | b[j].label_mask;
      if (!person_split || (mask & ~kPersonBit) != 0) return false;
      person_overlap = true;
      ++i;
      ++j;
    }
  }
  if (person_split) {
    if (!person_overlap) return false;
    if (!(place_similarity(store_, query, candidate) < kMaxPlaceSimilarity)) return false;
  }
  return true;
}

}  // namespace newsclip
