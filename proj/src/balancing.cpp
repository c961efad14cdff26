#include "newsclip/balancing.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "newsclip/error.hpp"
#include "newsclip/random.hpp"
#include "newsclip/scoring.hpp"

namespace newsclip {

namespace {

void sort_records(std::vector<AnnotationRecord>& records) {
  std::sort(records.begin(), records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::tie(a.caption_id, a.label) < std::tie(b.caption_id, b.label);
  });
}

// caption -> falsified image, for every FALSIFIED record.
std::map<SampleId, SampleId> falsified_map(const SplitDataset& dataset) {
  std::map<SampleId, SampleId> out;
  for (const auto& r : dataset.records) {
    if (r.label == Label::kFalsified) out[r.caption_id] = r.image_id;
  }
  return out;
}

SplitDataset keep_captions(const SplitDataset& dataset, const std::set<SampleId>& keep) {
  SplitDataset out{dataset.strategy, dataset.partition, {}};
  for (const auto& r : dataset.records) {
    if (keep.count(r.caption_id)) out.records.push_back(r);
  }
  return out;
}

// Cycles of the functional graph caption -> falsified image, restricted to
// captions present in the map; each cycle listed from its smallest caption.
std::vector<std::vector<SampleId>> find_cycles(const std::map<SampleId, SampleId>& next) {
  enum class State : std::uint8_t { kNew, kActive, kDone };
  std::unordered_map<SampleId, State> state;
  for (const auto& [c, _] : next) state[c] = State::kNew;

  std::vector<std::vector<SampleId>> cycles;
  for (const auto& [start, _] : next) {
    if (state[start] != State::kNew) continue;
    std::vector<SampleId> path;
    SampleId cur = start;
    while (true) {
      const auto it = state.find(cur);
      if (it == state.end() || it->second == State::kDone) break;
      if (it->second == State::kActive) {
        const auto pos = std::find(path.begin(), path.end(), cur);
        std::vector<SampleId> cycle(pos, path.end());
        std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
        cycles.push_back(std::move(cycle));
        break;
      }
      it->second = State::kActive;
      path.push_back(cur);
      cur = next.at(cur);
    }
    for (SampleId c : path) state[c] = State::kDone;
  }
  std::sort(cycles.begin(), cycles.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return cycles;
}

}  // namespace

std::vector<MatchResult> adversarial_filter(std::span<const MatchResult> matches) {
  std::size_t high = 0;
  for (const auto& m : matches) high += m.in_high_set ? 1 : 0;
  const std::size_t low = matches.size() - high;
  if (high == low) return {matches.begin(), matches.end()};

  const bool drop_low = low > high;
  const std::size_t surplus = drop_low ? low - high : high - low;
  std::vector<std::size_t> majority;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].in_high_set != drop_low) majority.push_back(i);
  }
  const auto delta = [&](std::size_t i) {
    const auto& m = matches[i];
    return drop_low ? m.cti_p - m.cti_f : m.cti_f - m.cti_p;
  };
  std::sort(majority.begin(), majority.end(), [&](std::size_t a, std::size_t b) {
    const double da = delta(a), db = delta(b);
    if (da != db) return da > db;
    return matches[a].caption_id < matches[b].caption_id;
  });

  std::vector<bool> removed(matches.size(), false);
  for (std::size_t k = 0; k < surplus; ++k) removed[majority[k]] = true;
  std::vector<MatchResult> out;
  out.reserve(matches.size() - surplus);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (!removed[i]) out.push_back(matches[i]);
  }
  return out;
}

SplitDataset build_split(std::span<const MatchResult> matches, Strategy strategy, Partition partition) {
  SplitDataset out{strategy, partition, {}};
  out.records.reserve(matches.size() * 2);
  std::set<SampleId> seen;
  for (const auto& m : matches) {
    if (!seen.insert(m.caption_id).second) {
      throw Error(ErrorCode::kDuplicateCaption, "caption " + std::to_string(m.caption_id));
    }
    out.records.push_back({m.caption_id, m.caption_id, Label::kPristine, strategy, partition});
    out.records.push_back({m.caption_id, m.image_id, Label::kFalsified, strategy, partition});
  }
  sort_records(out.records);
  return out;
}

SplitDataset enforce_image_balance(const SplitDataset& dataset) {
  std::set<SampleId> keep;
  for (const auto& cycle : find_cycles(falsified_map(dataset))) keep.insert(cycle.begin(), cycle.end());
  return keep_captions(dataset, keep);
}

SplitDataset enforce_cycle_cti_balance(const SplitDataset& dataset, const FeatureStore& store) {
  const auto next = falsified_map(dataset);
  const auto cycles = find_cycles(next);

  // net[i] = (#high - #low) over cycle i.
  std::vector<int> net(cycles.size(), 0);
  int span = 0;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    for (SampleId c : cycles[i]) {
      net[i] += cti(store, c, next.at(c)) > cti(store, c, c) ? 1 : -1;
    }
    span += std::abs(net[i]);
  }

  // Knapsack over the running net offset: best[off] is the largest caption
  // count reachable with offset off - span. Ties keep the earlier choice.
  const std::size_t width = static_cast<std::size_t>(2 * span + 1);
  constexpr long kUnreachable = -1;
  std::vector<long> best(width, kUnreachable);
  best[static_cast<std::size_t>(span)] = 0;
  std::vector<std::vector<bool>> take(cycles.size(), std::vector<bool>(width, false));
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    std::vector<long> updated = best;
    const long size = static_cast<long>(cycles[i].size());
    for (std::size_t off = 0; off < width; ++off) {
      if (best[off] == kUnreachable) continue;
      const long target = static_cast<long>(off) + net[i];
      if (target < 0 || target >= static_cast<long>(width)) continue;
      const auto t = static_cast<std::size_t>(target);
      if (best[off] + size > updated[t]) {
        updated[t] = best[off] + size;
        take[i][t] = true;
      }
    }
    best = std::move(updated);
  }

  std::set<SampleId> keep;
  auto off = static_cast<long>(span);
  for (std::size_t i = cycles.size(); i-- > 0;) {
    if (take[i][static_cast<std::size_t>(off)]) {
      keep.insert(cycles[i].begin(), cycles[i].end());
      off -= net[i];
    }
  }
  return keep_captions(dataset, keep);
}

SplitDataset build_merged(std::span<const SplitDataset> splits, const FeatureStore& store, std::uint64_t seed) {
  SplitDataset out;
  if (splits.empty()) return out;
  out.partition = splits.front().partition;
  std::set<Strategy> seen;
  for (const auto& s : splits) {
    if (s.is_merged() || !seen.insert(*s.strategy).second) {
      throw Error(ErrorCode::kInvalidConfig, "merge inputs must be distinct strategy splits");
    }
    if (s.partition != out.partition) throw Error(ErrorCode::kInvalidConfig, "merge inputs span partitions");
  }

  struct Pair {
    SampleId caption;
    SampleId falsified;
  };
  // queues[s][0] holds high-set pairs (cti_f > cti_p), queues[s][1] the rest.
  std::vector<std::array<std::vector<Pair>, 2>> queues(splits.size());
  for (std::size_t s = 0; s < splits.size(); ++s) {
    std::vector<Pair> all;
    for (const auto& [c, f] : falsified_map(splits[s])) all.push_back({c, f});
    Rng rng(mix_seed(seed, index_of(*splits[s].strategy)));
    rng.shuffle(std::span(all));
    for (const Pair& p : all) {
      const bool high = cti(store, p.caption, p.falsified) > cti(store, p.caption, p.caption);
      queues[s][high ? 0 : 1].push_back(p);
    }
  }

  // Owner (split index) of every claimed caption id and image id.
  std::unordered_map<SampleId, std::size_t> caption_owner, image_owner;
  const auto free_for = [](const auto& owners, SampleId id, std::size_t s) {
    const auto it = owners.find(id);
    return it == owners.end() || it->second == s;
  };

  // Even rounds draw from the high queues, odd rounds from the low ones.
  std::vector<std::array<std::size_t, 2>> cursor(splits.size(), {0, 0});
  std::vector<std::vector<Pair>> picked(splits.size());
  std::size_t rounds = 0;
  for (bool exhausted = false; !exhausted;) {
    const std::size_t side = rounds % 2;
    for (std::size_t s = 0; s < splits.size() && !exhausted; ++s) {
      bool found = false;
      auto& queue = queues[s][side];
      while (cursor[s][side] < queue.size()) {
        const Pair p = queue[cursor[s][side]++];
        if (free_for(caption_owner, p.caption, s) && free_for(image_owner, p.caption, s) &&
            free_for(image_owner, p.falsified, s)) {
          caption_owner[p.caption] = s;
          image_owner[p.caption] = s;
          image_owner[p.falsified] = s;
          picked[s].push_back(p);
          found = true;
          break;
        }
      }
      exhausted = !found;
    }
    if (!exhausted) ++rounds;
  }
  rounds -= rounds % 2;

  for (std::size_t s = 0; s < splits.size(); ++s) {
    const Strategy strategy = *splits[s].strategy;
    for (std::size_t i = 0; i < rounds; ++i) {
      const auto& p = picked[s][i];
      out.records.push_back({p.caption, p.caption, Label::kPristine, strategy, out.partition});
      out.records.push_back({p.caption, p.falsified, Label::kFalsified, strategy, out.partition});
    }
  }
  sort_records(out.records);
  return out;
}

DatasetTotals dataset_totals(std::span<const SplitDataset> splits) {
  DatasetTotals t;
  std::set<std::tuple<SampleId, SampleId, Label>> unique;
  for (const auto& s : splits) {
    t.total_sum += s.records.size();
    for (const auto& r : s.records) unique.emplace(r.caption_id, r.image_id, r.label);
  }
  t.total_unique = unique.size();
  return t;
}

}  // namespace newsclip
