#include <numeric>

#include <gtest/gtest.h>

#include "newsclip/matcher.hpp"
#include "test_support.hpp"

namespace newsclip {
namespace {

using testing::entity;
using testing::error_of;
using testing::make_record;
using testing::ToyStore;

std::vector<SampleId> all_ids(const FeatureStore& store) {
  std::vector<SampleId> ids(store.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Caption 0 with CTI 0.5 against its own image; three candidates 60+ days
// away with strategy scores 0.9 > 0.8 > 0.7 and CTI 0.3, 0.6, 0.7.
FeatureStore three_candidate_store() {
  ToyStore toy(2);
  auto unit = [](double a) {
    return std::vector<float>{static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))};
  };
  const double t0 = 0.0;
  // The query's text row, then images placed at the angles giving the wanted CTI.
  toy.add(make_record(0, {entity("Q1"), entity("Q2")}), unit(t0), unit(std::acos(0.5)));
  toy.add(make_record(100, {entity("A1"), entity("A2")}), unit(1.0), unit(std::acos(0.3)));
  toy.add(make_record(100, {entity("B1"), entity("B2")}), unit(1.1), unit(std::acos(0.6)));
  toy.add(make_record(100, {entity("C1"), entity("C2")}), unit(1.2), unit(std::acos(0.7)));
  return toy.build();
}

TEST(MatchOne, PrefersHighSetOverRank) {
  // Text-text ranking: candidate 1 is closest to the query text.
  const auto store = three_candidate_store();
  const std::vector<SampleId> cands = {1, 2, 3};
  const auto m = match_one(store, 0, cands, Strategy::kSemClipTextText);
  ASSERT_TRUE(m);
  ASSERT_LT(cti(store, 0, 1), cti(store, 0, 0));
  ASSERT_GT(cti(store, 0, 2), cti(store, 0, 0));
  EXPECT_EQ(m->image_id, 2u);
  EXPECT_TRUE(m->in_high_set);
  EXPECT_EQ(m->caption_id, 0u);
  EXPECT_EQ(m->strategy, Strategy::kSemClipTextText);
  EXPECT_EQ(m->score, strategy_score(store, Strategy::kSemClipTextText, 0, 2));
  EXPECT_EQ(m->cti_p, cti(store, 0, 0));
  EXPECT_EQ(m->cti_f, cti(store, 0, 2));
  EXPECT_EQ(m, match_bruteforce(store, 0, cands, Strategy::kSemClipTextText));
}

TEST(MatchOne, SinglePassingCandidateRegardlessOfCti) {
  const auto store = three_candidate_store();
  const std::vector<SampleId> cands = {1};
  const auto m = match_one(store, 0, cands, Strategy::kSemClipTextText);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->image_id, 1u);
  EXPECT_FALSE(m->in_high_set);
}

TEST(MatchOne, NoneWhenNothingPasses) {
  const auto store = three_candidate_store();
  const std::vector<SampleId> self = {0};
  EXPECT_FALSE(match_one(store, 0, self, Strategy::kSemClipTextImage));
  EXPECT_FALSE(match_bruteforce(store, 0, self, Strategy::kSemClipTextImage));
  EXPECT_FALSE(match_one(store, 0, {}, Strategy::kSemClipTextImage));
  EXPECT_FALSE(match_bruteforce(store, 0, {}, Strategy::kSemClipTextImage));
}

TEST(MatchOne, UnknownIds) {
  const auto store = three_candidate_store();
  const std::vector<SampleId> bad = {1, 9};
  EXPECT_EQ(error_of([&] { match_one(store, 0, bad, Strategy::kSemClipTextImage); }), ErrorCode::kUnknownId);
  EXPECT_EQ(error_of([&] { match_one(store, 9, {}, Strategy::kSemClipTextImage); }), ErrorCode::kUnknownId);
}

TEST(MatchOne, TiesBrokenByAscendingId) {
  ToyStore toy(2);
  toy.add(make_record(0, {entity("Q1"), entity("Q2")}), {1, 0}, {1, 0});
  for (int i = 0; i < 4; ++i) {
    toy.add(make_record(100, {entity("X" + std::to_string(i)), entity("Y" + std::to_string(i))}), {0, 1}, {0, 1});
  }
  const auto store = toy.build();
  const std::vector<SampleId> cands = {4, 2, 3, 1};
  for (Strategy s : kAllStrategies) {
    if (s == Strategy::kPersonSbertTextText || s == Strategy::kSceneResnetPlace) continue;
    const auto m = match_one(store, 0, cands, s);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->image_id, 1u);
  }
}

TEST(MatchOne, PersonRanksAscending) {
  ToyStore toy(2);
  auto rec = [](std::int64_t day) { return make_record(day, {testing::person("Ann"), entity("X" + std::to_string(day))}); };
  toy.add(rec(0), {}, {}, {1, 0}, {1, 0});
  toy.add(rec(100), {}, {}, {0.9f, 0.1f}, {0, 1});
  toy.add(rec(200), {}, {}, {0.1f, 0.9f}, {0, 1});
  const auto store = toy.build();
  const std::vector<SampleId> cands = {1, 2};
  const auto m = match_one(store, 0, cands, Strategy::kPersonSbertTextText);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->image_id, 2u);  // least similar SBERT text
}

TEST(MatchOne, ZeroRowCandidatesAreSkipped) {
  ToyStore toy(2);
  toy.add(make_record(0, {entity("Q1"), entity("Q2")}), {1, 0}, {1, 0});
  auto broken = make_record(100, {entity("A"), entity("B")});
  toy.add(broken, {1, 0}, {0, 0});
  toy.add(make_record(100, {entity("C"), entity("D")}), {0, 1}, {0, 1});
  const auto store = toy.build();
  const std::vector<SampleId> cands = {1, 2};
  const auto m = match_one(store, 0, cands, Strategy::kSemClipTextImage);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->image_id, 2u);
  EXPECT_EQ(m, match_bruteforce(store, 0, cands, Strategy::kSemClipTextImage));
}

TEST(MatchProperty, MatchOneEqualsBruteforceAndOracle) {
  int trials = 0;
  for (std::uint64_t seed = 1; trials < 1000; ++seed) {
    const auto store = generate_synthetic(testing::small_synth(60, 8), seed);
    Rng rng(mix_seed(seed, 99));
    for (int t = 0; t < 50; ++t, ++trials) {
      const Strategy s = kAllStrategies[rng.below(4)];
      const auto q = static_cast<SampleId>(rng.below(store.size()));
      std::vector<SampleId> cands;
      for (SampleId c = 0; c < store.size(); ++c) {
        if (rng.bernoulli(0.6)) cands.push_back(c);
      }
      rng.shuffle(std::span(cands));
      const auto fast = match_one(store, q, cands, s);
      const auto slow = match_bruteforce(store, q, cands, s);
      ASSERT_EQ(fast, slow) << "seed " << seed << " trial " << t << " " << to_string(s);
      ASSERT_EQ(slow, testing::oracle_match(store, q, cands, s)) << "seed " << seed << " trial " << t;
    }
  }
}

TEST(MatchProperty, TwoHundredQueriesFiveHundredCandidates) {
  const auto store = generate_synthetic(testing::small_synth(700, 16), 4242);
  std::vector<SampleId> cands(500);
  std::iota(cands.begin(), cands.end(), 200);
  std::size_t found = 0;
  for (Strategy s : kAllStrategies) {
    const Matcher matcher(store, s);
    for (SampleId q = 0; q < 200; ++q) {
      const auto fast = matcher.match_one(q, cands);
      ASSERT_EQ(fast, match_bruteforce(store, q, cands, s)) << to_string(s) << " q " << q;
      found += fast.has_value();
    }
  }
  EXPECT_GT(found, 400u);
}

TEST(AssignChunks, ProportionalRoundRobin) {
  const auto store = generate_synthetic(testing::small_synth(100), 1);
  // Only quality-passing samples are chunked; the default synthetic records all pass.
  const auto chunks = assign_chunks(store, 40, {0.5, 0.25, 0.25});
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].member_ids.size(), 40u);
  EXPECT_EQ(chunks[1].member_ids.size(), 40u);
  EXPECT_EQ(chunks[2].member_ids.size(), 20u);
  EXPECT_EQ(chunks[0].partition, Partition::kTrain);
  EXPECT_EQ(chunks[1].partition, Partition::kVal);
  EXPECT_EQ(chunks[2].partition, Partition::kTest);
  EXPECT_EQ(chunks[1].member_ids.front(), 40u);
  for (std::uint32_t i = 0; i < chunks.size(); ++i) EXPECT_EQ(chunks[i].chunk_id, i);
}

TEST(AssignChunks, SingleChunkGoesToTrain) {
  const auto store = generate_synthetic(testing::small_synth(50), 1);
  const auto chunks = assign_chunks(store, 1000, {0.889, 0.0555, 0.0555});
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].partition, Partition::kTrain);
  EXPECT_EQ(chunks[0].member_ids.size(), 50u);
}

TEST(AssignChunks, RejectsBadConfig) {
  const auto store = generate_synthetic(testing::small_synth(20), 1);
  EXPECT_EQ(error_of([&] { assign_chunks(store, 10, {1.0, 0.0, 0.0}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_of([&] { assign_chunks(store, 10, {0.5, 0.2, 0.2}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_of([&] { assign_chunks(store, 1, {0.5, 0.25, 0.25}); }), ErrorCode::kInvalidConfig);
}

TEST(AssignChunks, SkipsLowQualitySamples) {
  auto c = testing::small_synth(200);
  c.min_words = 3;
  c.min_entities = 1;
  const auto store = generate_synthetic(c, 3);
  const auto chunks = assign_chunks(store, 16, {0.5, 0.25, 0.25});
  std::set<SampleId> seen;
  for (const auto& ch : chunks) {
    EXPECT_TRUE(std::is_sorted(ch.member_ids.begin(), ch.member_ids.end()));
    for (SampleId id : ch.member_ids) {
      EXPECT_TRUE(check_pristine_quality(store.record(id)).accepted);
      EXPECT_TRUE(seen.insert(id).second);
    }
  }
  std::size_t passing = 0;
  for (const auto& r : store.manifest()) passing += check_pristine_quality(r).accepted;
  EXPECT_EQ(seen.size(), passing);
  EXPECT_LT(passing, store.size());
}

// Independent simulation of the dealing rule over chunk counts.
std::vector<Partition> oracle_deal(std::size_t chunks, const std::array<double, 3>& frac) {
  std::vector<Partition> out;
  std::array<double, 3> dealt = {0, 0, 0};
  for (std::size_t k = 1; k <= chunks; ++k) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t p = 0; p < 3; ++p) {
      const double deficit = frac[p] * static_cast<double>(k) - dealt[p];
      if (deficit > best_deficit + 1e-12) {
        best = p;
        best_deficit = deficit;
      }
    }
    dealt[best] += 1;
    out.push_back(kAllPartitions[best]);
  }
  return out;
}

TEST(AssignChunksProperty, CoversCorpusAndFollowsDealingRule) {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto n = static_cast<std::uint32_t>(20 + rng.below(300));
    const auto store = generate_synthetic(testing::small_synth(n, 4), t);
    const std::size_t chunk = 2 + rng.below(60);
    const double a = 0.2 + 0.6 * rng.uniform();
    const double b = (1.0 - a) * (0.1 + 0.8 * rng.uniform());
    const std::array<double, 3> frac = {a, b, 1.0 - a - b};
    const auto chunks = assign_chunks(store, chunk, {frac[0], frac[1], frac[2]});
    const auto want = oracle_deal(chunks.size(), frac);
    std::size_t total = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      EXPECT_EQ(chunks[i].partition, want[i]);
      EXPECT_LE(chunks[i].member_ids.size(), chunk);
      if (i + 1 < chunks.size()) EXPECT_EQ(chunks[i].member_ids.size(), chunk);
      total += chunks[i].member_ids.size();
    }
    EXPECT_EQ(total, n);
  }
}

TEST(MatchSplit, CandidatesStayInsideTheirChunk) {
  const auto store = generate_synthetic(testing::small_synth(300), 21);
  const auto chunks = assign_chunks(store, 100, {0.4, 0.3, 0.3});
  std::map<SampleId, std::uint32_t> chunk_of;
  for (const auto& c : chunks) {
    for (SampleId id : c.member_ids) chunk_of[id] = c.chunk_id;
  }
  for (Strategy s : kAllStrategies) {
    const auto out = match_split(store, chunks, s, 2);
    for (Partition p : kAllPartitions) {
      const auto& v = out[index_of(p)];
      EXPECT_TRUE(std::is_sorted(v.begin(), v.end(),
                                 [](const MatchResult& a, const MatchResult& b) { return a.caption_id < b.caption_id; }));
      for (const auto& m : v) {
        EXPECT_EQ(chunk_of.at(m.caption_id), chunk_of.at(m.image_id));
        EXPECT_EQ(chunks[chunk_of.at(m.caption_id)].partition, p);
      }
    }
  }
}

TEST(MatchSplit, WorkerCountDoesNotChangeOutput) {
  const auto store = generate_synthetic(testing::small_synth(600), 5);
  const auto chunks = assign_chunks(store, 150, {0.5, 0.25, 0.25});
  for (Strategy s : kAllStrategies) {
    const auto one = match_split(store, chunks, s, 1);
    EXPECT_EQ(one, match_split(store, chunks, s, 8));
    EXPECT_EQ(one, match_split(store, chunks, s, 3));
  }
}

TEST(MatchSplit, EqualsPerQueryBruteforce) {
  const auto store = generate_synthetic(testing::small_synth(400), 17);
  const auto chunks = assign_chunks(store, 130, {0.5, 0.25, 0.25});
  for (Strategy s : kAllStrategies) {
    const auto out = match_split(store, chunks, s, 4);
    PartitionedMatches want;
    for (const auto& c : chunks) {
      for (SampleId q : c.member_ids) {
        if (auto m = match_bruteforce(store, q, c.member_ids, s)) want[index_of(c.partition)].push_back(*m);
      }
    }
    for (auto& v : want) {
      std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.caption_id < b.caption_id; });
    }
    EXPECT_EQ(out, want) << to_string(s);
  }
}

TEST(MatchSplit, ChunkWithinThirtyDaysHasNoMatches) {
  ToyStore toy(4);
  Rng rng(3);
  for (int i = 0; i < 12; ++i) {
    std::vector<float> r(4);
    for (auto& x : r) x = static_cast<float>(rng.normal());
    toy.add(make_record(i * 2, {entity("E" + std::to_string(i)), entity("F" + std::to_string(i))}), r, r, r, r);
  }
  const auto store = toy.build();
  const auto chunks = assign_chunks(store, 12, {0.5, 0.25, 0.25});
  for (Strategy s : kAllStrategies) {
    const auto out = match_split(store, chunks, s, 1);
    for (const auto& v : out) EXPECT_TRUE(v.empty());
  }
}

TEST(RanksBefore, DirectionAndTies) {
  EXPECT_TRUE(ranks_before(Strategy::kSemClipTextImage, 0.9, 5, 0.8, 1));
  EXPECT_TRUE(ranks_before(Strategy::kPersonSbertTextText, 0.1, 5, 0.8, 1));
  EXPECT_TRUE(ranks_before(Strategy::kSceneResnetPlace, 0.5, 1, 0.5, 2));
  EXPECT_FALSE(ranks_before(Strategy::kSceneResnetPlace, 0.5, 2, 0.5, 1));
}

}  // namespace
}  // namespace newsclip
