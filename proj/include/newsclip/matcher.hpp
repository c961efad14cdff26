#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "newsclip/constraints.hpp"
#include "newsclip/feature_store.hpp"
#include "newsclip/types.hpp"

namespace newsclip {

// One falsified pairing: the query's caption with the selected candidate's
// image.
struct MatchResult {
  SampleId caption_id = 0;
  SampleId image_id = 0;
  Strategy strategy = Strategy::kSemClipTextImage;
  double score = 0.0;  // strategy score of the selected candidate
  double cti_p = 0.0;  // CTI of (caption, own image)
  double cti_f = 0.0;  // CTI of (caption, selected image)
  bool in_high_set = false;  // cti_f > cti_p

  bool operator==(const MatchResult&) const = default;
};

// Ranking order: strategy score in the strategy's direction, then ascending
// sample id.
bool ranks_before(Strategy strategy, double score_a, SampleId id_a, double score_b, SampleId id_b);

// Per-(store, strategy) matching state. Candidates whose strategy score or
// CTI is not finite (zero rows) are never selected.
class Matcher {
 public:
  Matcher(const FeatureStore& store, Strategy strategy);

  const FeatureStore& store() const { return store_; }
  Strategy strategy() const { return strategy_; }
  const PairFilter& filter() const { return filter_; }

  // Best-ranked passing candidate with cti_f > cti_p if any, else the
  // best-ranked passing candidate. Throws Error(kUnknownId).
  std::optional<MatchResult> match_one(SampleId query_id, std::span<const SampleId> candidate_ids) const;

  // Selection over precomputed strategy scores and CTI values (both indexed
  // like candidate_ids). ctis[k] must equal cti(query, candidate_ids[k]).
  std::optional<MatchResult> select(SampleId query_id, std::span<const SampleId> candidate_ids,
                                    std::span<const double> scores, std::span<const double> ctis) const;

 private:
  const FeatureStore& store_;
  Strategy strategy_;
  PairFilter filter_;
};

std::optional<MatchResult> match_one(const FeatureStore& store, SampleId query_id,
                                     std::span<const SampleId> candidate_ids, Strategy strategy);

// Reference oracle: scores every candidate, sorts the full list, filters with
// check_pair, partitions into high/low sets and returns the head of the high
// set, else the head of the low set. No early exit.
std::optional<MatchResult> match_bruteforce(const FeatureStore& store, SampleId query_id,
                                            std::span<const SampleId> candidate_ids, Strategy strategy);

struct ChunkAssignment {
  std::uint32_t chunk_id = 0;
  Partition partition = Partition::kTrain;
  std::vector<SampleId> member_ids;  // ascending

  bool operator==(const ChunkAssignment&) const = default;
};

struct PartitionFractions {
  double train = 0.889;
  double val = 0.0555;
  double test = 0.0555;
};

// Quality-passing samples in id order, cut into consecutive chunks and dealt
// to partitions by largest proportional deficit (ties to the earlier
// partition). Throws Error(kInvalidConfig).
std::vector<ChunkAssignment> assign_chunks(const FeatureStore& store, std::size_t chunk_size,
                                           PartitionFractions fractions);

using PartitionedMatches = std::array<std::vector<MatchResult>, kPartitionCount>;

// Matches every chunk member against its own chunk. Output per partition is
// ascending by caption_id and identical for every worker count.
PartitionedMatches match_split(const FeatureStore& store, std::span<const ChunkAssignment> chunks,
                               Strategy strategy, unsigned workers = 1);

}  // namespace newsclip
