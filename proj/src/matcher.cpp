#include "newsclip/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "newsclip/error.hpp"
#include "newsclip/parallel.hpp"
#include "newsclip/scoring.hpp"

namespace newsclip {

namespace {

void require_ids(const FeatureStore& store, SampleId query_id, std::span<const SampleId> candidate_ids) {
  if (!store.contains(query_id)) throw Error(ErrorCode::kUnknownId, "query " + std::to_string(query_id));
  for (SampleId c : candidate_ids) {
    if (!store.contains(c)) throw Error(ErrorCode::kUnknownId, "candidate " + std::to_string(c));
  }
}

constexpr std::size_t kQueryBlock = PackedRows::kMaxQueries;

}  // namespace

bool ranks_before(Strategy strategy, double score_a, SampleId id_a, double score_b, SampleId id_b) {
  if (score_a != score_b) return spec_of(strategy).ascending ? score_a < score_b : score_a > score_b;
  return id_a < id_b;
}

Matcher::Matcher(const FeatureStore& store, Strategy strategy)
    : store_(store), strategy_(strategy), filter_(store, strategy) {}

std::optional<MatchResult> Matcher::match_one(SampleId query_id, std::span<const SampleId> candidate_ids) const {
  require_ids(store_, query_id, candidate_ids);
  const auto spec = spec_of(strategy_);
  const auto& qm = store_.matrix(spec.query);
  const auto& cm = store_.matrix(spec.candidate);
  if (qm.is_zero_row(query_id)) return std::nullopt;

  const auto query_row = qm.row(query_id);
  std::vector<double> scores(candidate_ids.size());
  for (std::size_t k = 0; k < candidate_ids.size(); ++k) {
    const SampleId c = candidate_ids[k];
    scores[k] = cm.is_zero_row(c) ? kNegInf : dot(query_row, cm.row(c));
  }
  if (strategy_ == Strategy::kSemClipTextImage) return select(query_id, candidate_ids, scores, scores);
  std::vector<double> ctis(candidate_ids.size());
  for (std::size_t k = 0; k < candidate_ids.size(); ++k) ctis[k] = cti(store_, query_id, candidate_ids[k]);
  return select(query_id, candidate_ids, scores, ctis);
}

std::optional<MatchResult> Matcher::select(SampleId query_id, std::span<const SampleId> candidate_ids,
                                           std::span<const double> scores, std::span<const double> ctis) const {
  const double cti_p = cti(store_, query_id, query_id);
  if (!std::isfinite(cti_p)) return std::nullopt;

  // Best-ranked candidate on one side of cti_p that passes the pair filter.
  // The filter only runs for candidates that would beat the current best.
  const auto best_passer = [&](bool high) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < candidate_ids.size(); ++k) {
      if (!std::isfinite(scores[k]) || !std::isfinite(ctis[k]) || (ctis[k] > cti_p) != high) continue;
      if (best && !ranks_before(strategy_, scores[k], candidate_ids[k], scores[*best], candidate_ids[*best])) continue;
      if (filter_.accepts(query_id, candidate_ids[k])) best = k;
    }
    return best;
  };
  const auto result = [&](std::size_t k) {
    return MatchResult{query_id, candidate_ids[k], strategy_, scores[k], cti_p, ctis[k], ctis[k] > cti_p};
  };

  // The first high-set passer in rank order is the best-ranked passer among
  // candidates whose CTI beats cti_p. Without one, every passer is low.
  if (const auto k = best_passer(true)) return result(*k);
  if (const auto k = best_passer(false)) return result(*k);
  return std::nullopt;
}

std::optional<MatchResult> match_one(const FeatureStore& store, SampleId query_id,
                                     std::span<const SampleId> candidate_ids, Strategy strategy) {
  return Matcher(store, strategy).match_one(query_id, candidate_ids);
}

std::optional<MatchResult> match_bruteforce(const FeatureStore& store, SampleId query_id,
                                            std::span<const SampleId> candidate_ids, Strategy strategy) {
  require_ids(store, query_id, candidate_ids);
  struct Ranked {
    SampleId id;
    double score;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(candidate_ids.size());
  for (SampleId c : candidate_ids) ranked.push_back({c, strategy_score(store, strategy, query_id, c)});
  // Non-finite scores (zero or corrupt rows) are never selectable.
  std::erase_if(ranked, [](const Ranked& r) { return !std::isfinite(r.score); });

  const bool ascending = spec_of(strategy).ascending;
  std::sort(ranked.begin(), ranked.end(), [ascending](const Ranked& a, const Ranked& b) {
    if (a.score == b.score) return a.id < b.id;
    return ascending ? a.score < b.score : a.score > b.score;
  });

  const double cti_p = cti(store, query_id, query_id);
  const auto& query = store.record(query_id);
  std::vector<MatchResult> high, low;
  for (const auto& r : ranked) {
    if (!check_pair(query, store.record(r.id), strategy, store).accepted) continue;
    const double cti_f = cti(store, query_id, r.id);
    if (!std::isfinite(cti_f)) continue;
    MatchResult m{query_id, r.id, strategy, r.score, cti_p, cti_f, cti_f > cti_p};
    (m.in_high_set ? high : low).push_back(m);
  }
  if (!std::isfinite(cti_p)) return std::nullopt;
  if (!high.empty()) return high.front();
  if (!low.empty()) return low.front();
  return std::nullopt;
}

std::vector<ChunkAssignment> assign_chunks(const FeatureStore& store, std::size_t chunk_size,
                                           PartitionFractions fractions) {
  if (chunk_size < 2) throw Error(ErrorCode::kInvalidConfig, "chunk_size must be at least 2");
  const std::array<double, kPartitionCount> frac = {fractions.train, fractions.val, fractions.test};
  for (double f : frac) {
    if (!(f > 0.0)) throw Error(ErrorCode::kInvalidConfig, "partition fractions must be positive");
  }
  if (std::abs(frac[0] + frac[1] + frac[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "partition fractions must sum to 1");
  }

  std::vector<SampleId> eligible;
  for (const auto& r : store.manifest()) {
    if (check_pristine_quality(r).accepted) eligible.push_back(r.sample_id);
  }

  std::vector<ChunkAssignment> chunks;
  std::array<std::size_t, kPartitionCount> dealt = {};
  for (std::size_t start = 0; start < eligible.size(); start += chunk_size) {
    const std::size_t end = std::min(eligible.size(), start + chunk_size);
    const auto k = static_cast<double>(chunks.size() + 1);
    std::size_t pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < kPartitionCount; ++p) {
      const double deficit = frac[p] * k - static_cast<double>(dealt[p]);
      if (deficit > best + 1e-12) {
        best = deficit;
        pick = p;
      }
    }
    ++dealt[pick];
    ChunkAssignment c;
    c.chunk_id = static_cast<std::uint32_t>(chunks.size());
    c.partition = static_cast<Partition>(pick);
    c.member_ids.assign(eligible.begin() + static_cast<std::ptrdiff_t>(start),
                        eligible.begin() + static_cast<std::ptrdiff_t>(end));
    chunks.push_back(std::move(c));
  }
  return chunks;
}

PartitionedMatches match_split(const FeatureStore& store, std::span<const ChunkAssignment> chunks,
                               Strategy strategy, unsigned workers) {
  const Matcher matcher(store, strategy);
  const auto spec = spec_of(strategy);
  const auto& query_matrix = store.matrix(spec.query);

  for (const auto& chunk : chunks) {
    for (SampleId id : chunk.member_ids) {
      if (!store.contains(id)) throw Error(ErrorCode::kUnknownId, "chunk member " + std::to_string(id));
    }
  }

  // CLIP text-image scores are the CTI values; other strategies need a second
  // pass against the CLIP image rows.
  const bool score_is_cti = strategy == Strategy::kSemClipTextImage;
  const auto& clip_text = store.matrix(Modality::kClipText);
  std::vector<PackedRows> packed, packed_cti;
  packed.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    packed.emplace_back(store.matrix(spec.candidate), chunk.member_ids);
    if (!score_is_cti) packed_cti.emplace_back(store.matrix(Modality::kClipImage), chunk.member_ids);
  }

  struct Task {
    std::size_t chunk;
    std::size_t begin;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<std::optional<MatchResult>>> slots(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    slots[c].resize(chunks[c].member_ids.size());
    for (std::size_t b = 0; b < chunks[c].member_ids.size(); b += kQueryBlock) tasks.push_back({c, b});
  }

  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& members = chunks[task.chunk].member_ids;
    const std::size_t nq = std::min(kQueryBlock, members.size() - task.begin);
    std::array<std::span<const float>, kQueryBlock> rows;
    for (std::size_t q = 0; q < nq; ++q) rows[q] = query_matrix.row(members[task.begin + q]);

    std::vector<double> scores(nq * members.size());
    packed[task.chunk].score(std::span(rows.data(), nq), scores);
    std::vector<double> ctis;
    if (!score_is_cti) {
      for (std::size_t q = 0; q < nq; ++q) rows[q] = clip_text.row(members[task.begin + q]);
      ctis.resize(scores.size());
      packed_cti[task.chunk].score(std::span(rows.data(), nq), ctis);
    }
    const std::span<const double> cti_view = score_is_cti ? std::span<const double>(scores) : std::span<const double>(ctis);
    for (std::size_t q = 0; q < nq; ++q) {
      const SampleId query = members[task.begin + q];
      if (query_matrix.is_zero_row(query)) continue;
      const std::size_t off = q * members.size();
      slots[task.chunk][task.begin + q] = matcher.select(query, members, std::span(scores).subspan(off, members.size()),
                                                         cti_view.subspan(off, members.size()));
    }
  });

  PartitionedMatches out;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    auto& bucket = out[index_of(chunks[c].partition)];
    for (const auto& m : slots[c]) {
      if (m) bucket.push_back(*m);
    }
  }
  for (auto& bucket : out) {
    std::sort(bucket.begin(), bucket.end(),
              [](const MatchResult& a, const MatchResult& b) { return a.caption_id < b.caption_id; });
  }
  return out;
}

}  // namespace newsclip
