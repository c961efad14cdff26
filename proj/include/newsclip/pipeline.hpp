#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "newsclip/balancing.hpp"
#include "newsclip/feature_store.hpp"
#include "newsclip/matcher.hpp"
#include "newsclip/validation.hpp"

namespace newsclip {

struct PipelineConfig {
  std::filesystem::path store_path;
  std::size_t chunk_size = 40000;
  PartitionFractions fractions;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  unsigned workers = 0;  // 0 = one per hardware thread
};

// Overlays the keys present in `j` onto `base`. Throws Error(kInvalidConfig).
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
void validate_config(const PipelineConfig& config);

// The settings that determine output bytes. Paths and worker count are left
// out so that relocating a run or changing parallelism leaves it unchanged.
nlohmann::ordered_json effective_config_json(const PipelineConfig& config);

struct SplitAudit {
  std::string file;
  ValidationReport report;
  double cti_ratio = 0.5;
};

struct GeneratedDatasets {
  // splits[strategy][partition]; strategies not run stay empty.
  std::array<std::array<SplitDataset, kPartitionCount>, kStrategyCount> splits;
  std::array<SplitDataset, kPartitionCount> merged;
  std::array<std::size_t, kStrategyCount> raw_matches = {};       // before filtering
  std::array<std::size_t, kStrategyCount> filtered_matches = {};  // after adversarial filter
  std::vector<SplitAudit> audits;

  bool ran(Strategy s) const;
  std::vector<Strategy> strategies;
  std::size_t audit_violations() const;
};

// In-memory pipeline: quality filter, chunking, matching, adversarial filter,
// split build, Person image/CTI balance, merge, audit.
GeneratedDatasets generate_datasets(const FeatureStore& store, const PipelineConfig& config);

struct GenerateOutcome {
  GeneratedDatasets datasets;
  std::filesystem::path output_dir;
};

// generate_datasets plus every export, written atomically into
// config.output_dir (a failed run leaves no partial tree). Errors are
// re-thrown with a "[stage]" prefix.
GenerateOutcome run_generate(const PipelineConfig& config, std::ostream* log = nullptr);

struct ReportOptions {
  std::optional<std::filesystem::path> store_path;
  Partition partition = Partition::kTest;
  std::uint32_t per_strategy = 200;
  std::uint64_t seed = 0;
  std::uint32_t negatives = 4;
  std::uint32_t trials = 2000;
};

inline constexpr std::array<std::string_view, 6> kReportNames = {"stats", "overlap", "cti-ratio",
                                                                 "retrieval-sanity", "audit", "eval-subset"};

struct ReportOutcome {
  nlohmann::ordered_json document;
  bool failures = false;  // audit found violations
};

// Computes a named report over a generated dataset directory and writes it to
// <dataset_dir>/reports/. Throws Error(kUnknownReport) for unknown names.
ReportOutcome run_report(const std::filesystem::path& dataset_dir, const std::string& name,
                         const ReportOptions& options);

std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace newsclip
