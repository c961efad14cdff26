#include "newsclip/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "newsclip/constraints.hpp"
#include "newsclip/error.hpp"
#include "newsclip/random.hpp"
#include "newsclip/scoring.hpp"

namespace newsclip {

namespace {

using ordered_json = nlohmann::ordered_json;

std::set<std::pair<SampleId, SampleId>> falsified_pairs(const SplitDataset& d) {
  std::set<std::pair<SampleId, SampleId>> out;
  for (const auto& r : d.records) {
    if (r.label == Label::kFalsified) out.emplace(r.caption_id, r.image_id);
  }
  return out;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

OverlapMatrix overlap_matrix(std::span<const SplitDataset> splits) {
  std::array<std::set<std::pair<SampleId, SampleId>>, kStrategyCount> sets;
  for (const auto& s : splits) {
    if (s.strategy) sets[index_of(*s.strategy)] = falsified_pairs(s);
  }
  OverlapMatrix m;
  for (std::size_t i = 0; i < kStrategyCount; ++i) {
    for (std::size_t j = 0; j < kStrategyCount; ++j) {
      const std::size_t denom = std::min(sets[i].size(), sets[j].size());
      if (denom == 0) continue;
      std::size_t inter = 0;
      const auto& small = sets[i].size() <= sets[j].size() ? sets[i] : sets[j];
      const auto& large = sets[i].size() <= sets[j].size() ? sets[j] : sets[i];
      for (const auto& p : small) inter += large.count(p);
      m.ratio[i][j] = static_cast<double>(inter) / static_cast<double>(denom);
    }
  }
  return m;
}

nlohmann::ordered_json OverlapMatrix::to_json(Partition partition) const {
  ordered_json j;
  j["partition"] = to_string(partition);
  auto names = ordered_json::array();
  for (Strategy s : strategies) names.push_back(to_string(s));
  j["strategies"] = std::move(names);
  auto rows = ordered_json::array();
  for (const auto& row : ratio) rows.push_back(row);
  j["overlap"] = std::move(rows);
  j["conventions"] = "ratio = |F_i & F_j| / min(|F_i|, |F_j|); 0/0 = 0";
  return j;
}

std::string OverlapMatrix::to_text() const {
  std::ostringstream os;
  os << pad_right("split", 28);
  for (std::size_t j = 0; j < kStrategyCount; ++j) os << pad_left("(" + std::string(1, char('a' + j)) + ")", 8);
  os << '\n';
  for (std::size_t i = 0; i < kStrategyCount; ++i) {
    os << pad_right("(" + std::string(1, char('a' + i)) + ") " + std::string(to_string(strategies[i])), 28);
    for (double v : ratio[i]) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.4f", v);
      os << pad_left(buf, 8);
    }
    os << '\n';
  }
  return os.str();
}

double cti_ratio_audit(const SplitDataset& dataset, const FeatureStore& store) {
  std::size_t captions = 0, pristine_wins = 0;
  for (const auto& r : dataset.records) {
    if (r.label != Label::kFalsified) continue;
    ++captions;
    const double cti_p = cti(store, r.caption_id, r.caption_id);
    const double cti_f = cti(store, r.caption_id, r.image_id);
    if (!(cti_f > cti_p)) ++pristine_wins;
  }
  if (captions == 0) return 0.5;
  return static_cast<double>(pristine_wins) / static_cast<double>(captions);
}

double retrieval_sanity(const FeatureStore& store, std::uint32_t num_negatives, std::uint32_t trials,
                        std::uint64_t seed) {
  if (num_negatives < 1) throw Error(ErrorCode::kInvalidConfig, "num_negatives must be at least 1");
  if (trials < 1) throw Error(ErrorCode::kInvalidConfig, "trials must be at least 1");
  if (store.size() < std::size_t{num_negatives} + 1) {
    throw Error(ErrorCode::kInvalidConfig, "store too small for the requested negatives");
  }
  Rng rng(seed);
  std::size_t hits = 0;
  std::vector<SampleId> negatives;
  for (std::uint32_t t = 0; t < trials; ++t) {
    const auto i = static_cast<SampleId>(rng.below(store.size()));
    negatives.clear();
    while (negatives.size() < num_negatives) {
      const auto j = static_cast<SampleId>(rng.below(store.size()));
      if (j == i || std::find(negatives.begin(), negatives.end(), j) != negatives.end()) continue;
      negatives.push_back(j);
    }
    const double own = cti(store, i, i);
    const bool wins = std::all_of(negatives.begin(), negatives.end(), [&](SampleId j) { return own > cti(store, i, j); });
    hits += wins ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

ValidationReport audit_constraints(const SplitDataset& dataset, const FeatureStore& store) {
  ValidationReport report;
  for (std::size_t r = 0; r < kRejectReasonCount; ++r) report.check(std::string(to_string(static_cast<RejectReason>(r))));
  auto& unknown = report.check("UNKNOWN_ID");

  for (const auto& rec : dataset.records) {
    if (rec.label != Label::kFalsified) continue;
    if (!store.contains(rec.caption_id) || !store.contains(rec.image_id)) {
      unknown.offending_ids.push_back(rec.caption_id);
      continue;
    }
    const auto& caption = store.record(rec.caption_id);
    const auto& image = store.record(rec.image_id);
    std::vector<RejectReason> reasons;
    for (const auto* r : {&caption, &image}) {
      const auto q = check_pristine_quality(*r);
      reasons.insert(reasons.end(), q.reasons.begin(), q.reasons.end());
    }
    const auto pair = check_pair(caption, image, rec.strategy, store);
    reasons.insert(reasons.end(), pair.reasons.begin(), pair.reasons.end());
    for (RejectReason reason : reasons) {
      report.check(std::string(to_string(reason))).offending_ids.push_back(rec.caption_id);
    }
  }
  report.normalize();
  return report;
}

SplitDataset export_eval_subset(const SplitDataset& merged, std::uint32_t per_strategy, std::uint64_t seed) {
  if (per_strategy == 0 || per_strategy % 2 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "per_strategy must be a positive even number");
  }
  const std::size_t half = per_strategy / 2;
  SplitDataset out{std::nullopt, merged.partition, {}};
  for (Strategy s : kAllStrategies) {
    std::array<std::vector<AnnotationRecord>, 2> by_label;
    for (const auto& r : merged.records) {
      if (r.strategy == s) by_label[static_cast<std::size_t>(r.label)].push_back(r);
    }
    if (by_label[0].empty() && by_label[1].empty()) continue;
    for (std::size_t l = 0; l < 2; ++l) {
      auto& pool = by_label[l];
      if (pool.size() < half) {
        throw Error(ErrorCode::kInsufficientRecords,
                    std::string(to_string(s)) + " has " + std::to_string(pool.size()) + " " +
                        std::string(to_string(static_cast<Label>(l))) + " records, need " + std::to_string(half));
      }
      std::sort(pool.begin(), pool.end());
      Rng rng(mix_seed(seed, index_of(s) * 2 + l));
      // Partial Fisher-Yates: the first `half` slots become the sample.
      for (std::size_t i = 0; i < half; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      out.records.insert(out.records.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(half));
    }
  }
  if (out.records.empty()) throw Error(ErrorCode::kInsufficientRecords, "merged split has no records");
  std::sort(out.records.begin(), out.records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::tie(a.strategy, a.caption_id, a.label) < std::tie(b.strategy, b.caption_id, b.label);
  });
  return out;
}

DatasetStats dataset_stats(std::span<const SplitDataset> splits, std::span<const SplitDataset> merged) {
  DatasetStats stats;
  std::array<std::vector<SplitDataset>, kPartitionCount> per_partition;
  for (const auto& s : splits) {
    if (!s.strategy) continue;
    stats.splits[index_of(*s.strategy)][index_of(s.partition)] += s.records.size();
    per_partition[index_of(s.partition)].push_back(s);
  }
  for (Partition p : kAllPartitions) {
    const auto totals = dataset_totals(per_partition[index_of(p)]);
    stats.total_sum[index_of(p)] = totals.total_sum;
    stats.total_unique[index_of(p)] = totals.total_unique;
  }
  for (const auto& m : merged) stats.merged[index_of(m.partition)] += m.records.size();
  return stats;
}

nlohmann::ordered_json DatasetStats::to_json() const {
  auto row = [](const std::array<std::size_t, kPartitionCount>& counts) {
    ordered_json j;
    for (Partition p : kAllPartitions) j[std::string(to_string(p))] = counts[index_of(p)];
    return j;
  };
  ordered_json j;
  ordered_json per_split;
  for (Strategy s : kAllStrategies) per_split[std::string(to_string(s))] = row(splits[index_of(s)]);
  j["splits"] = std::move(per_split);
  j["total_sum"] = row(total_sum);
  j["total_unique"] = row(total_unique);
  j["merged"] = row(merged);
  return j;
}

std::string DatasetStats::to_text() const {
  std::ostringstream os;
  const std::size_t name_w = 26, col_w = 12;
  os << pad_right("Split", name_w);
  for (Partition p : kAllPartitions) os << pad_left(std::string(to_string(p)), col_w);
  os << '\n';
  auto line = [&](const std::string& name, const std::array<std::size_t, kPartitionCount>& counts) {
    os << pad_right(name, name_w);
    for (std::size_t c : counts) os << pad_left(std::to_string(c), col_w);
    os << '\n';
  };
  for (Strategy s : kAllStrategies) line(std::string(to_string(s)), splits[index_of(s)]);
  line("total_sum", total_sum);
  line("total_unique", total_unique);
  line("merged", merged);
  return os.str();
}

std::string annotation_file_name(std::optional<Strategy> strategy, Partition partition) {
  const std::string stem = strategy ? std::string(to_string(*strategy)) : std::string("merged");
  return stem + "_" + std::string(to_string(partition)) + ".jsonl";
}

std::string annotation_file_name(const SplitDataset& dataset) {
  return annotation_file_name(dataset.strategy, dataset.partition);
}

std::string serialize_annotations(const SplitDataset& dataset) {
  std::string out;
  for (const auto& r : dataset.records) {
    ordered_json j;
    j["caption_id"] = r.caption_id;
    j["image_id"] = r.image_id;
    j["label"] = to_string(r.label);
    j["strategy"] = to_string(r.strategy);
    j["partition"] = to_string(r.partition);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_annotations(const std::filesystem::path& path, const SplitDataset& dataset) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  const auto text = serialize_annotations(dataset);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

SplitDataset read_annotations(const std::filesystem::path& path, std::optional<Strategy> strategy,
                              Partition partition) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  SplitDataset out{strategy, partition, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = path.filename().string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      AnnotationRecord r;
      r.caption_id = j.at("caption_id").get<SampleId>();
      r.image_id = j.at("image_id").get<SampleId>();
      const auto label = parse_label(j.at("label").get<std::string>());
      const auto strat = parse_strategy(j.at("strategy").get<std::string>());
      const auto part = parse_partition(j.at("partition").get<std::string>());
      if (!label || !strat || !part) throw Error(ErrorCode::kManifestParse, where + ": unknown enum value");
      r.label = *label;
      r.strategy = *strat;
      r.partition = *part;
      out.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kManifestParse, where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace newsclip
