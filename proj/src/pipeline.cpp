#include "newsclip/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "newsclip/error.hpp"
#include "newsclip/reports.hpp"

namespace newsclip {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string pretty(const ordered_json& j) { return j.dump(2) + "\n"; }

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.message());
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::kIo, std::string("[") + name + "] " + e.what());
  }
}

std::vector<std::string> strategy_names(const std::vector<Strategy>& strategies) {
  std::vector<std::string> out;
  for (Strategy s : strategies) out.emplace_back(to_string(s));
  return out;
}

// Annotation files found in a generated dataset directory.
struct LoadedDatasets {
  std::vector<SplitDataset> splits;
  std::vector<SplitDataset> merged;
};

LoadedDatasets load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kMissingFile, dir.string());
  LoadedDatasets out;
  for (Partition p : kAllPartitions) {
    for (Strategy s : kAllStrategies) {
      const auto path = dir / annotation_file_name(s, p);
      if (std::filesystem::exists(path)) out.splits.push_back(read_annotations(path, s, p));
    }
    const auto merged = dir / annotation_file_name(std::nullopt, p);
    if (std::filesystem::exists(merged)) out.merged.push_back(read_annotations(merged, std::nullopt, p));
  }
  if (out.splits.empty() && out.merged.empty()) {
    throw Error(ErrorCode::kMissingFile, "no annotation files in " + dir.string());
  }
  return out;
}

FeatureStore require_store(const ReportOptions& options) {
  if (!options.store_path) throw Error(ErrorCode::kInvalidConfig, "this report needs --store");
  return load_store(*options.store_path);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  static const std::set<std::string> kKnown = {"store_path", "chunk_size", "fractions", "strategies",
                                               "seed",       "output_dir", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
  }
  try {
    if (j.contains("store_path")) base.store_path = j["store_path"].get<std::string>();
    if (j.contains("output_dir")) base.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("chunk_size")) {
      if (!j["chunk_size"].is_number_unsigned()) throw Error(ErrorCode::kInvalidConfig, "chunk_size");
      base.chunk_size = j["chunk_size"].get<std::size_t>();
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw Error(ErrorCode::kInvalidConfig, "seed must be unsigned");
      base.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("workers")) base.workers = j["workers"].get<unsigned>();
    if (j.contains("fractions")) {
      const auto& f = j["fractions"];
      if (f.is_array() && f.size() == 3) {
        base.fractions = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
      } else if (f.is_object()) {
        base.fractions = {f.at("train").get<double>(), f.at("val").get<double>(), f.at("test").get<double>()};
      } else {
        throw Error(ErrorCode::kInvalidConfig, "fractions must be [train, val, test]");
      }
    }
    if (j.contains("strategies")) {
      base.strategies.clear();
      for (const auto& s : j["strategies"]) {
        const auto parsed = parse_strategy(s.get<std::string>());
        if (!parsed) throw Error(ErrorCode::kInvalidConfig, "unknown strategy " + s.dump());
        base.strategies.push_back(*parsed);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  return base;
}

void validate_config(const PipelineConfig& c) {
  if (c.chunk_size < 2) throw Error(ErrorCode::kInvalidConfig, "chunk_size must be at least 2");
  const auto& f = c.fractions;
  if (!(f.train > 0.0 && f.val > 0.0 && f.test > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "partition fractions must be positive");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "partition fractions must sum to 1");
  }
  if (c.strategies.empty()) throw Error(ErrorCode::kInvalidConfig, "no strategies selected");
  std::set<Strategy> unique(c.strategies.begin(), c.strategies.end());
  if (unique.size() != c.strategies.size()) throw Error(ErrorCode::kInvalidConfig, "duplicate strategy");
}

nlohmann::ordered_json effective_config_json(const PipelineConfig& c) {
  ordered_json j;
  j["chunk_size"] = c.chunk_size;
  j["fractions"] = {c.fractions.train, c.fractions.val, c.fractions.test};
  // Canonical order so that flag order cannot change the output bytes.
  std::vector<Strategy> sorted = c.strategies;
  std::sort(sorted.begin(), sorted.end());
  j["strategies"] = strategy_names(sorted);
  j["seed"] = c.seed;
  return j;
}

bool GeneratedDatasets::ran(Strategy s) const {
  return std::find(strategies.begin(), strategies.end(), s) != strategies.end();
}

std::size_t GeneratedDatasets::audit_violations() const {
  std::size_t n = 0;
  for (const auto& a : audits) n += a.report.failure_count();
  return n;
}

GeneratedDatasets generate_datasets(const FeatureStore& store, const PipelineConfig& config) {
  validate_config(config);
  GeneratedDatasets out;
  out.strategies = config.strategies;
  std::sort(out.strategies.begin(), out.strategies.end());
  for (Strategy s : kAllStrategies) {
    for (Partition p : kAllPartitions) out.splits[index_of(s)][index_of(p)] = SplitDataset{s, p, {}};
  }

  const auto chunks = stage("chunk", [&] { return assign_chunks(store, config.chunk_size, config.fractions); });

  for (Strategy s : out.strategies) {
    const auto matches = stage("match", [&] { return match_split(store, chunks, s, config.workers); });
    for (Partition p : kAllPartitions) {
      const auto& raw = matches[index_of(p)];
      out.raw_matches[index_of(s)] += raw.size();
      const auto filtered = adversarial_filter(raw);
      out.filtered_matches[index_of(s)] += filtered.size();
      auto split = stage("split", [&] { return build_split(filtered, s, p); });
      if (s == Strategy::kPersonSbertTextText) {
        split = enforce_cycle_cti_balance(enforce_image_balance(split), store);
      }
      out.splits[index_of(s)][index_of(p)] = std::move(split);
    }
  }

  for (Partition p : kAllPartitions) {
    std::vector<SplitDataset> inputs;
    for (Strategy s : out.strategies) inputs.push_back(out.splits[index_of(s)][index_of(p)]);
    out.merged[index_of(p)] = stage("merge", [&] { return build_merged(inputs, store, config.seed); });
    out.merged[index_of(p)].partition = p;
  }

  stage("audit", [&] {
    for (Strategy s : out.strategies) {
      for (Partition p : kAllPartitions) {
        const auto& d = out.splits[index_of(s)][index_of(p)];
        out.audits.push_back({annotation_file_name(d), audit_constraints(d, store), cti_ratio_audit(d, store)});
      }
    }
    for (const auto& m : out.merged) {
      out.audits.push_back({annotation_file_name(m), audit_constraints(m, store), cti_ratio_audit(m, store)});
    }
    return 0;
  });
  return out;
}

std::string sha256_file_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

GenerateOutcome run_generate(const PipelineConfig& config, std::ostream* log) {
  stage("config", [&] {
    validate_config(config);
    if (config.output_dir.empty()) throw Error(ErrorCode::kInvalidConfig, "output_dir is not set");
    if (config.store_path.empty()) throw Error(ErrorCode::kInvalidConfig, "store_path is not set");
    return 0;
  });
  const auto store = stage("load", [&] { return load_store(config.store_path); });
  if (log) *log << "loaded " << store.size() << " samples\n";

  GenerateOutcome outcome{generate_datasets(store, config), config.output_dir};
  const auto& data = outcome.datasets;
  if (log) {
    for (Strategy s : data.strategies) {
      *log << to_string(s) << ": " << data.raw_matches[index_of(s)] << " matches, "
           << data.filtered_matches[index_of(s)] << " after CTI filtering\n";
    }
  }

  auto out_dir = config.output_dir;
  if (out_dir.filename().empty()) out_dir = out_dir.parent_path();
  const auto staging = out_dir.parent_path() / (out_dir.filename().string() + ".partial");
  try {
    stage("export", [&] {
      std::filesystem::remove_all(staging);
      std::filesystem::create_directories(staging);

      for (Strategy s : data.strategies) {
        for (const auto& d : data.splits[index_of(s)]) write_annotations(staging / annotation_file_name(d), d);
      }
      for (const auto& m : data.merged) write_annotations(staging / annotation_file_name(m), m);

      std::vector<SplitDataset> all_splits;
      for (Strategy s : data.strategies) {
        for (const auto& d : data.splits[index_of(s)]) all_splits.push_back(d);
      }
      const auto stats = dataset_stats(all_splits, data.merged);
      write_text(staging / "stats.json", pretty(stats.to_json()));
      write_text(staging / "stats.txt", stats.to_text());

      for (Partition p : kAllPartitions) {
        std::vector<SplitDataset> per_partition;
        for (Strategy s : data.strategies) per_partition.push_back(data.splits[index_of(s)][index_of(p)]);
        const auto overlap = overlap_matrix(per_partition);
        const auto stem = std::string("overlap_") + std::string(to_string(p));
        write_text(staging / (stem + ".json"), pretty(overlap.to_json(p)));
        write_text(staging / (stem + ".txt"), overlap.to_text());
      }

      ordered_json audit;
      audit["violations"] = data.audit_violations();
      for (const auto& a : data.audits) {
        ordered_json entry;
        entry["cti_ratio"] = a.cti_ratio;
        entry["report"] = a.report.to_json();
        audit["datasets"][a.file] = std::move(entry);
      }
      write_text(staging / "audit.json", pretty(audit));

      ordered_json manifest;
      manifest["tool"] = "newsclip";
      manifest["format_version"] = 1;
      manifest["config"] = effective_config_json(config);
      for (Modality m : kAllModalities) {
        manifest["store"][embedding_file_name(m)] = sha256_file_hex(config.store_path / embedding_file_name(m));
      }
      manifest["store"][std::string(kManifestFileName)] = sha256_file_hex(config.store_path / kManifestFileName);
      std::vector<std::string> files;
      for (const auto& entry : std::filesystem::directory_iterator(staging)) {
        files.push_back(entry.path().filename().string());
      }
      std::sort(files.begin(), files.end());
      ordered_json hashes = ordered_json::object();
      for (const auto& f : files) hashes[f] = sha256_file_hex(staging / f);
      manifest["outputs"] = std::move(hashes);
      write_text(staging / "run_manifest.json", pretty(manifest));

      std::filesystem::remove_all(out_dir);
      std::filesystem::rename(staging, out_dir);
      return 0;
    });
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(staging, ec);
    throw;
  }
  return outcome;
}

ReportOutcome run_report(const std::filesystem::path& dataset_dir, const std::string& name,
                         const ReportOptions& options) {
  if (std::find(kReportNames.begin(), kReportNames.end(), name) == kReportNames.end()) {
    throw Error(ErrorCode::kUnknownReport, name);
  }
  const auto loaded = load_dataset_dir(dataset_dir);
  ReportOutcome outcome;
  auto& doc = outcome.document;
  std::string extra_file;
  std::string extra_text;

  if (name == "stats") {
    doc = dataset_stats(loaded.splits, loaded.merged).to_json();
  } else if (name == "overlap") {
    std::vector<SplitDataset> per_partition;
    for (const auto& s : loaded.splits) {
      if (s.partition == options.partition) per_partition.push_back(s);
    }
    doc = overlap_matrix(per_partition).to_json(options.partition);
  } else if (name == "cti-ratio") {
    const auto store = require_store(options);
    for (const auto* group : {&loaded.splits, &loaded.merged}) {
      for (const auto& d : *group) doc["cti_ratio"][annotation_file_name(d)] = cti_ratio_audit(d, store);
    }
  } else if (name == "retrieval-sanity") {
    const auto store = require_store(options);
    doc["num_negatives"] = options.negatives;
    doc["trials"] = options.trials;
    doc["seed"] = options.seed;
    doc["top1_accuracy"] = retrieval_sanity(store, options.negatives, options.trials, options.seed);
    doc["chance"] = 1.0 / (options.negatives + 1.0);
  } else if (name == "audit") {
    const auto store = require_store(options);
    std::size_t violations = 0;
    for (const auto* group : {&loaded.splits, &loaded.merged}) {
      for (const auto& d : *group) {
        const auto report = audit_constraints(d, store);
        violations += report.failure_count();
        doc["datasets"][annotation_file_name(d)] = report.to_json();
      }
    }
    doc["violations"] = violations;
    outcome.failures = violations > 0;
  } else {  // eval-subset
    const auto it = std::find_if(loaded.merged.begin(), loaded.merged.end(),
                                 [&](const SplitDataset& m) { return m.partition == options.partition; });
    if (it == loaded.merged.end()) {
      throw Error(ErrorCode::kMissingFile, annotation_file_name(std::nullopt, options.partition));
    }
    const auto subset = export_eval_subset(*it, options.per_strategy, options.seed);
    extra_file = "eval_subset_" + std::string(to_string(options.partition)) + ".jsonl";
    extra_text = serialize_annotations(subset);
    doc["partition"] = to_string(options.partition);
    doc["per_strategy"] = options.per_strategy;
    doc["seed"] = options.seed;
    doc["records"] = subset.records.size();
    doc["file"] = extra_file;
  }

  const auto reports_dir = dataset_dir / "reports";
  std::filesystem::create_directories(reports_dir);
  write_text(reports_dir / (name + ".json"), pretty(doc));
  if (!extra_file.empty()) write_text(reports_dir / extra_file, extra_text);
  return outcome;
}

}  // namespace newsclip
