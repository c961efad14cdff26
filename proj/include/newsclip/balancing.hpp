#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "newsclip/feature_store.hpp"
#include "newsclip/matcher.hpp"
#include "newsclip/types.hpp"

namespace newsclip {

struct AnnotationRecord {
  SampleId caption_id = 0;
  SampleId image_id = 0;
  Label label = Label::kPristine;
  Strategy strategy = Strategy::kSemClipTextImage;  // origin strategy for merged records
  Partition partition = Partition::kTrain;

  auto operator<=>(const AnnotationRecord&) const = default;
};

// Annotation records for one strategy (or the merged mix, strategy unset)
// and one partition.
struct SplitDataset {
  std::optional<Strategy> strategy;
  Partition partition = Partition::kTrain;
  std::vector<AnnotationRecord> records;

  bool is_merged() const { return !strategy.has_value(); }
  bool operator==(const SplitDataset&) const = default;
};

// Drops the largest-delta matches of the majority CTI set until the high set
// (cti_f > cti_p) and the low set have equal size. Ties on delta go to the
// smaller caption_id. Survivors keep their input order.
std::vector<MatchResult> adversarial_filter(std::span<const MatchResult> matches);

// One PRISTINE and one FALSIFIED record per match, sorted by
// (caption_id, label). Throws Error(kDuplicateCaption).
SplitDataset build_split(std::span<const MatchResult> matches, Strategy strategy, Partition partition);

// Keeps exactly the captions that lie on cycles of the caption -> falsified
// image map. That is the largest caption set whose falsified images are a
// permutation of its pristine images, so the PRISTINE and FALSIFIED image
// multisets coincide.
SplitDataset enforce_image_balance(const SplitDataset& dataset);

// For an image-balanced dataset: keeps a maximum-size union of whole cycles
// whose high-set and low-set falsified counts are equal, so the result is
// both image-balanced and CTI-balanced.
SplitDataset enforce_cycle_cti_balance(const SplitDataset& dataset, const FeatureStore& store);

// Mixes up to four strategy splits of one partition: k caption pairs per
// strategy, with caption ids and image ids disjoint across strategies.
// Greedy round-robin over a seeded shuffle of each split's captions, taking
// high-set and low-set pairs alternately so every strategy contributes k/2 of
// each and the merged split keeps the 50-50 CTI ratio.
// Throws Error(kInvalidConfig) on mixed partitions, merged or repeated inputs.
SplitDataset build_merged(std::span<const SplitDataset> splits, const FeatureStore& store, std::uint64_t seed);

struct DatasetTotals {
  std::size_t total_sum = 0;
  std::size_t total_unique = 0;  // distinct (caption_id, image_id, label)
  bool operator==(const DatasetTotals&) const = default;
};

DatasetTotals dataset_totals(std::span<const SplitDataset> splits);

}  // namespace newsclip
