#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "newsclip/balancing.hpp"
#include "newsclip/feature_store.hpp"
#include "newsclip/validation.hpp"

namespace newsclip {

struct OverlapMatrix {
  std::array<Strategy, kStrategyCount> strategies = kAllStrategies;
  std::array<std::array<double, kStrategyCount>, kStrategyCount> ratio = {};

  nlohmann::ordered_json to_json(Partition partition) const;
  std::string to_text() const;
};

// ratio[i][j] = |F_i ∩ F_j| / min(|F_i|, |F_j|) over FALSIFIED
// (caption_id, image_id) pairs; 0/0 is 0, so an empty split has a zero row
// including its diagonal. Splits are matched to rows by their strategy; a
// missing strategy counts as empty.
OverlapMatrix overlap_matrix(std::span<const SplitDataset> splits);

// Fraction of captions whose pristine image is not beaten by the falsified
// one, i.e. !(cti_f > cti_p), the complement of the matcher's high set.
// An empty dataset scores 0.5.
double cti_ratio_audit(const SplitDataset& dataset, const FeatureStore& store);

// Seeded top-1 retrieval: a trial succeeds when a caption's own image
// strictly outscores num_negatives distinct random other images.
// Throws Error(kInvalidConfig).
double retrieval_sanity(const FeatureStore& store, std::uint32_t num_negatives, std::uint32_t trials,
                        std::uint64_t seed);

// Re-checks quality and pair rules for every FALSIFIED record, using each
// record's own strategy. One check per rejection reason; offending ids are
// caption ids.
ValidationReport audit_constraints(const SplitDataset& dataset, const FeatureStore& store);

// Seeded sample of per_strategy/2 PRISTINE and per_strategy/2 FALSIFIED
// records per origin strategy present in the merged split. Throws
// Error(kInsufficientRecords), also for an empty merged split, or
// Error(kInvalidConfig) for odd sizes.
SplitDataset export_eval_subset(const SplitDataset& merged, std::uint32_t per_strategy, std::uint64_t seed);

struct DatasetStats {
  std::array<std::array<std::size_t, kPartitionCount>, kStrategyCount> splits = {};
  std::array<std::size_t, kPartitionCount> total_sum = {};
  std::array<std::size_t, kPartitionCount> total_unique = {};
  std::array<std::size_t, kPartitionCount> merged = {};

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

DatasetStats dataset_stats(std::span<const SplitDataset> splits, std::span<const SplitDataset> merged);

// Annotation export: one JSON object per line.
std::string annotation_file_name(const SplitDataset& dataset);
std::string annotation_file_name(std::optional<Strategy> strategy, Partition partition);
std::string serialize_annotations(const SplitDataset& dataset);
void write_annotations(const std::filesystem::path& path, const SplitDataset& dataset);
// Strategy/partition of the dataset come from the caller; records carry their
// own. Throws Error(kManifestParse) on malformed lines.
SplitDataset read_annotations(const std::filesystem::path& path, std::optional<Strategy> strategy,
                              Partition partition);

}  // namespace newsclip
