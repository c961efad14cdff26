#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "newsclip/balancing.hpp"
#include "test_support.hpp"

namespace newsclip {
namespace {

using testing::error_of;

MatchResult match(SampleId caption, SampleId image, double cti_p, double cti_f) {
  return {caption, image, Strategy::kSemClipTextImage, 0.0, cti_p, cti_f, cti_f > cti_p};
}

std::size_t high_count(const std::vector<MatchResult>& v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](const auto& m) { return m.in_high_set; }));
}

TEST(AdversarialFilter, AlreadyBalanced) {
  const std::vector<MatchResult> in = {match(1, 2, 0.5, 0.6), match(2, 3, 0.5, 0.4), match(3, 4, 0.5, 0.7),
                                       match(4, 5, 0.5, 0.1)};
  EXPECT_EQ(adversarial_filter(in), in);
}

TEST(AdversarialFilter, RemovesLargestDeltaLowMatches) {
  // One high, three low with deltas cti_p - cti_f of 0.4, 0.1, 0.2.
  const std::vector<MatchResult> in = {match(1, 9, 0.5, 0.6), match(2, 9, 0.5, 0.1), match(3, 9, 0.5, 0.4),
                                       match(4, 9, 0.5, 0.3)};
  const auto out = adversarial_filter(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].caption_id, 1u);
  EXPECT_EQ(out[1].caption_id, 3u);  // delta 0.1 survives
}

TEST(AdversarialFilter, AllHighLeavesNothing) {
  const std::vector<MatchResult> in = {match(1, 2, 0.1, 0.6), match(2, 3, 0.1, 0.4), match(3, 4, 0.1, 0.7),
                                       match(4, 5, 0.1, 0.2)};
  EXPECT_TRUE(adversarial_filter(in).empty());
  EXPECT_TRUE(adversarial_filter({}).empty());
}

TEST(AdversarialFilter, TiesGoToSmallerCaption) {
  const std::vector<MatchResult> in = {match(7, 1, 0.5, 0.3), match(3, 1, 0.5, 0.3), match(5, 1, 0.5, 0.9)};
  const auto out = adversarial_filter(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].caption_id, 7u);  // caption 3 removed first on the tie
  EXPECT_EQ(out[1].caption_id, 5u);
}

TEST(AdversarialFilterProperty, BalancedOrderedAndRemovesTheExtremes) {
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    std::vector<MatchResult> in;
    const auto n = rng.below(30);
    for (SampleId c = 0; c < n; ++c) {
      // Coarse values force delta ties.
      const double p = static_cast<double>(rng.below(5)) / 4.0;
      const double f = static_cast<double>(rng.below(5)) / 4.0;
      in.push_back(match(c * 3 % 31, c, p, f));
    }
    const auto out = adversarial_filter(in);
    const std::size_t high_in = high_count(in), low_in = in.size() - high_in;
    EXPECT_EQ(high_count(out) * 2, out.size());
    EXPECT_EQ(out.size(), 2 * std::min(high_in, low_in));
    // Survivors appear in input order.
    std::size_t j = 0;
    for (const auto& m : in) {
      if (j < out.size() && m == out[j]) ++j;
    }
    EXPECT_EQ(j, out.size());
    // Every removed majority match ranks at or above every kept one.
    const bool low_major = low_in > high_in;
    auto key = [&](const MatchResult& m) {
      const double d = low_major ? m.cti_p - m.cti_f : m.cti_f - m.cti_p;
      return std::make_pair(d, -static_cast<long>(m.caption_id));
    };
    std::set<SampleId> kept;
    for (const auto& m : out) kept.insert(m.caption_id);
    for (const auto& removed : in) {
      if (kept.count(removed.caption_id)) continue;
      EXPECT_NE(removed.in_high_set, low_major);
      for (const auto& k : out) {
        if (k.in_high_set != low_major) EXPECT_GE(key(removed), key(k));
      }
    }
  }
}

TEST(BuildSplit, TwoRecordsPerMatch) {
  const std::vector<MatchResult> in = {match(5, 1, 0, 0), match(2, 7, 0, 0), match(9, 5, 0, 0)};
  const auto d = build_split(in, Strategy::kSceneResnetPlace, Partition::kVal);
  ASSERT_EQ(d.records.size(), 6u);
  EXPECT_EQ(d.strategy, Strategy::kSceneResnetPlace);
  EXPECT_EQ(d.partition, Partition::kVal);
  std::size_t pristine = 0;
  for (const auto& r : d.records) {
    pristine += r.label == Label::kPristine;
    if (r.label == Label::kPristine) EXPECT_EQ(r.image_id, r.caption_id);
    EXPECT_EQ(r.strategy, Strategy::kSceneResnetPlace);
    EXPECT_EQ(r.partition, Partition::kVal);
  }
  EXPECT_EQ(pristine, 3u);
  EXPECT_EQ(d.records[0], (AnnotationRecord{2, 2, Label::kPristine, Strategy::kSceneResnetPlace, Partition::kVal}));
  EXPECT_EQ(d.records[1], (AnnotationRecord{2, 7, Label::kFalsified, Strategy::kSceneResnetPlace, Partition::kVal}));
}

TEST(BuildSplit, EmptyAndDuplicate) {
  EXPECT_TRUE(build_split({}, Strategy::kSemClipTextText, Partition::kTest).records.empty());
  const std::vector<MatchResult> dup = {match(1, 2, 0, 0), match(1, 3, 0, 0)};
  EXPECT_EQ(error_of([&] { build_split(dup, Strategy::kSemClipTextText, Partition::kTest); }),
            ErrorCode::kDuplicateCaption);
}

SplitDataset split_from_map(const std::map<SampleId, SampleId>& falsified, Strategy s = Strategy::kPersonSbertTextText,
                            Partition p = Partition::kTrain) {
  std::vector<MatchResult> in;
  for (const auto& [c, f] : falsified) in.push_back({c, f, s, 0.0, 0.0, 0.0, false});
  return build_split(in, s, p);
}

std::multiset<SampleId> images_with(const SplitDataset& d, Label label) {
  std::multiset<SampleId> out;
  for (const auto& r : d.records) {
    if (r.label == label) out.insert(r.image_id);
  }
  return out;
}

TEST(ImageBalance, ThreeCycleKept) {
  const auto d = split_from_map({{1, 2}, {2, 3}, {3, 1}});
  const auto out = enforce_image_balance(d);
  EXPECT_EQ(out.records, d.records);
  EXPECT_EQ(images_with(out, Label::kPristine), (std::multiset<SampleId>{1, 2, 3}));
  EXPECT_EQ(images_with(out, Label::kPristine), images_with(out, Label::kFalsified));
}

TEST(ImageBalance, DanglingMatchDropped) {
  EXPECT_TRUE(enforce_image_balance(split_from_map({{10, 20}})).records.empty());
}

TEST(ImageBalance, TailsIntoCycleDropped) {
  // 4 -> 1 feeds the 1 <-> 2 cycle but 4 is never a falsified image.
  const auto out = enforce_image_balance(split_from_map({{1, 2}, {2, 1}, {4, 1}, {5, 6}}));
  std::set<SampleId> captions;
  for (const auto& r : out.records) captions.insert(r.caption_id);
  EXPECT_EQ(captions, (std::set<SampleId>{1, 2}));
}

// Largest caption subset whose pristine and falsified image multisets agree,
// by exhaustive search.
std::size_t oracle_max_balanced(const std::map<SampleId, SampleId>& f) {
  const std::vector<std::pair<SampleId, SampleId>> items(f.begin(), f.end());
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << items.size()); ++mask) {
    std::multiset<SampleId> pristine, falsified;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (mask >> i & 1) {
        pristine.insert(items[i].first);
        falsified.insert(items[i].second);
      }
    }
    if (pristine == falsified) best = std::max(best, pristine.size());
  }
  return best;
}

TEST(ImageBalanceProperty, BalancedFixpointAndMaximal) {
  Rng rng(13);
  for (int t = 0; t < 300; ++t) {
    std::map<SampleId, SampleId> f;
    const auto n = rng.below(11);
    const auto universe = n + rng.below(4);
    for (SampleId c = 0; c < n; ++c) {
      auto img = static_cast<SampleId>(rng.below(universe));
      if (img == c) img = static_cast<SampleId>((c + 1) % universe);
      if (img == c) continue;
      f[c] = img;
    }
    const auto d = split_from_map(f);
    const auto out = enforce_image_balance(d);
    EXPECT_EQ(images_with(out, Label::kPristine), images_with(out, Label::kFalsified));
    EXPECT_EQ(enforce_image_balance(out).records, out.records);
    EXPECT_EQ(out.records.size() / 2, oracle_max_balanced(f));
    for (const auto& r : out.records) EXPECT_NE(std::find(d.records.begin(), d.records.end(), r), d.records.end());
  }
}

// Store whose CTI values are driven by per-sample 2-d rows.
FeatureStore cti_store(Rng& rng, std::size_t n) {
  testing::ToyStore toy(2);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = [&] { return std::vector<float>{static_cast<float>(rng.normal()), static_cast<float>(rng.normal())}; };
    toy.add(testing::make_record(0, {testing::entity("A"), testing::entity("B")}), v(), v());
  }
  return toy.build();
}

TEST(CycleCtiBalanceProperty, BalancedBothWaysAndMaximal) {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const auto store = cti_store(rng, n);
    std::vector<SampleId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    std::map<SampleId, SampleId> f;
    for (SampleId c = 0; c < n; ++c) {
      if (perm[c] != c && rng.bernoulli(0.9)) f[c] = perm[c];
    }
    const auto balanced = enforce_image_balance(split_from_map(f));
    const auto out = enforce_cycle_cti_balance(balanced, store);
    EXPECT_EQ(images_with(out, Label::kPristine), images_with(out, Label::kFalsified));
    int net = 0;
    for (const auto& r : out.records) {
      if (r.label == Label::kFalsified) {
        net += testing::oracle_cti(store, r.caption_id, r.image_id) > testing::oracle_cti(store, r.caption_id, r.caption_id) ? 1 : -1;
      }
    }
    EXPECT_EQ(net, 0);

    // Exhaustive: largest subset that is image- and CTI-balanced.
    const std::vector<std::pair<SampleId, SampleId>> items(f.begin(), f.end());
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << items.size()); ++mask) {
      std::multiset<SampleId> p, q;
      int bal = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!(mask >> i & 1)) continue;
        const auto [c, img] = items[i];
        p.insert(c);
        q.insert(img);
        bal += testing::oracle_cti(store, c, img) > testing::oracle_cti(store, c, c) ? 1 : -1;
      }
      if (p == q && bal == 0) best = std::max(best, p.size());
    }
    EXPECT_EQ(out.records.size() / 2, best) << "trial " << t;
  }
}

// Every caption has the same CLIP text row and image rows turn away from it as
// the id grows, so cti(c, img) falls with img: a falsified image is in the
// high set exactly when its id is below the caption's.
FeatureStore ordered_cti_store(std::size_t n) {
  testing::ToyStore toy(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 1.5 * static_cast<double>(i) / static_cast<double>(n);
    toy.add(testing::make_record(0, {testing::entity("A"), testing::entity("B")}), {1.0f, 0.0f},
            {static_cast<float>(std::cos(angle)), static_cast<float>(std::sin(angle))});
  }
  return toy.build();
}

// Pairs up neighbouring captions (first+2i <-> first+2i+1), so half the
// falsified pairs are high and half low.
SplitDataset range_split(Strategy s, SampleId first, std::size_t pairs, Partition p = Partition::kTrain) {
  std::map<SampleId, SampleId> f;
  for (std::size_t i = 0; i < pairs; ++i) f[first + static_cast<SampleId>(i)] = first + static_cast<SampleId>(i ^ 1);
  return split_from_map(f, s, p);
}

bool ordered_high(const AnnotationRecord& r) { return r.image_id < r.caption_id; }

TEST(BuildMerged, DisjointInputsKeepEverything) {
  std::vector<SplitDataset> splits;
  for (Strategy s : kAllStrategies) splits.push_back(range_split(s, 100 * static_cast<SampleId>(index_of(s)), 10));
  const auto merged = build_merged(splits, ordered_cti_store(400), 1);
  EXPECT_TRUE(merged.is_merged());
  EXPECT_EQ(merged.records.size(), 80u);
  std::map<Strategy, std::size_t> per;
  for (const auto& r : merged.records) per[r.strategy] += 1;
  for (Strategy s : kAllStrategies) EXPECT_EQ(per[s], 20u);
}

TEST(BuildMerged, TotalOverlapGivesNothing) {
  // Both splits use captions {1, 2} and images {1, 2} only.
  const std::vector<SplitDataset> splits = {split_from_map({{1, 2}, {2, 1}}, Strategy::kSemClipTextImage),
                                            split_from_map({{1, 2}, {2, 1}}, Strategy::kSceneResnetPlace)};
  const auto store = ordered_cti_store(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_TRUE(build_merged(splits, store, seed).records.empty());
}

TEST(BuildMerged, HighAndLowCountsMatchPerStrategy) {
  // 3 high + 1 low for one strategy: only one of each survives.
  const std::vector<SplitDataset> splits = {
      split_from_map({{1, 0}, {3, 2}, {5, 4}, {6, 7}}, Strategy::kSemClipTextImage),
      split_from_map({{10, 11}, {11, 10}, {12, 13}, {13, 12}}, Strategy::kSceneResnetPlace)};
  const auto merged = build_merged(splits, ordered_cti_store(20), 4);
  EXPECT_EQ(merged.records.size(), 8u);
  std::map<Strategy, int> net;
  for (const auto& r : merged.records) {
    if (r.label == Label::kFalsified) net[r.strategy] += ordered_high(r) ? 1 : -1;
  }
  EXPECT_EQ(net[Strategy::kSemClipTextImage], 0);
  EXPECT_EQ(net[Strategy::kSceneResnetPlace], 0);
  // Only high pairs: nothing can be balanced.
  const std::vector<SplitDataset> one_sided = {split_from_map({{1, 0}, {3, 2}}, Strategy::kSemClipTextImage)};
  EXPECT_TRUE(build_merged(one_sided, ordered_cti_store(20), 4).records.empty());
}

TEST(BuildMerged, SeedOnlyReordersConflictFreeInputs) {
  std::vector<SplitDataset> splits;
  for (Strategy s : kAllStrategies) splits.push_back(range_split(s, 50 * static_cast<SampleId>(index_of(s)), 8));
  const auto store = ordered_cti_store(200);
  const auto a = build_merged(splits, store, 1);
  const auto b = build_merged(splits, store, 99);
  EXPECT_EQ(a.records.size(), 64u);
  EXPECT_EQ(std::multiset<AnnotationRecord>(a.records.begin(), a.records.end()),
            std::multiset<AnnotationRecord>(b.records.begin(), b.records.end()));
}

TEST(BuildMerged, RejectsBadInputs) {
  const auto a = range_split(Strategy::kSemClipTextImage, 0, 3);
  const auto b = range_split(Strategy::kSemClipTextImage, 10, 3);
  const auto c = range_split(Strategy::kSemClipTextText, 20, 3, Partition::kVal);
  const auto store = ordered_cti_store(30);
  std::vector<SplitDataset> repeated = {a, b};
  EXPECT_EQ(error_of([&] { build_merged(repeated, store, 1); }), ErrorCode::kInvalidConfig);
  std::vector<SplitDataset> mixed = {a, c};
  EXPECT_EQ(error_of([&] { build_merged(mixed, store, 1); }), ErrorCode::kInvalidConfig);
  SplitDataset m = a;
  m.strategy.reset();
  std::vector<SplitDataset> merged_in = {m};
  EXPECT_EQ(error_of([&] { build_merged(merged_in, store, 1); }), ErrorCode::kInvalidConfig);
  EXPECT_TRUE(build_merged({}, store, 1).records.empty());
}

TEST(BuildMergedProperty, EqualCountsDisjointIdsAndCtiBalance) {
  Rng rng(77);
  const auto store = ordered_cti_store(60);
  for (int t = 0; t < 100; ++t) {
    std::vector<SplitDataset> splits;
    for (Strategy s : kAllStrategies) {
      if (rng.bernoulli(0.2)) continue;
      std::map<SampleId, SampleId> f;
      const auto n = rng.below(25);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto c = static_cast<SampleId>(rng.below(60));
        const auto img = static_cast<SampleId>(rng.below(60));
        if (c != img) f[c] = img;
      }
      splits.push_back(split_from_map(f, s));
    }
    const auto merged = build_merged(splits, store, t);
    std::map<Strategy, std::size_t> per;
    std::map<SampleId, Strategy> caption_owner, image_owner;
    std::set<SampleId> captions;
    for (const auto& r : merged.records) {
      per[r.strategy] += 1;
      if (r.label == Label::kPristine) EXPECT_TRUE(captions.insert(r.caption_id).second);
      for (auto* owners : {&image_owner}) {
        const auto [it, fresh] = owners->emplace(r.image_id, r.strategy);
        EXPECT_EQ(it->second, r.strategy);
      }
      const auto [it, fresh] = caption_owner.emplace(r.caption_id, r.strategy);
      EXPECT_EQ(it->second, r.strategy);
      // Every merged record comes from its origin split.
      const auto src = std::find_if(splits.begin(), splits.end(), [&](const auto& s) { return s.strategy == r.strategy; });
      ASSERT_NE(src, splits.end());
      EXPECT_NE(std::find(src->records.begin(), src->records.end(), r), src->records.end());
    }
    if (!merged.records.empty()) {
      for (const auto& s : splits) EXPECT_EQ(per[*s.strategy], merged.records.size() / splits.size());
    }
    // Each strategy contributes as many high-set as low-set pairs.
    std::map<Strategy, int> net;
    for (const auto& r : merged.records) {
      if (r.label == Label::kFalsified) net[r.strategy] += ordered_high(r) ? 1 : -1;
    }
    for (const auto& [strategy, v] : net) EXPECT_EQ(v, 0) << to_string(strategy);
    // Caption and image sets are disjoint across origin strategies, in either role.
    for (const auto& [id, owner] : caption_owner) {
      if (image_owner.count(id)) EXPECT_EQ(image_owner.at(id), owner);
    }
    EXPECT_EQ(merged, build_merged(splits, store, t));
  }
}

TEST(DatasetTotals, Examples) {
  std::vector<SplitDataset> splits;
  for (Strategy s : kAllStrategies) {
    SplitDataset d{s, Partition::kTrain, {}};
    for (SampleId i = 0; i < 10; ++i) {
      d.records.push_back({static_cast<SampleId>(index_of(s) * 10 + i), 0, Label::kPristine, s, Partition::kTrain});
    }
    splits.push_back(d);
  }
  EXPECT_EQ(dataset_totals(splits), (DatasetTotals{40, 40}));

  SplitDataset a{Strategy::kSemClipTextImage, Partition::kTrain, {}};
  for (SampleId i = 0; i < 4; ++i) a.records.push_back({i, i + 1, Label::kFalsified, Strategy::kSemClipTextImage});
  SplitDataset b = a;
  b.strategy = Strategy::kSemClipTextText;
  for (auto& r : b.records) r.strategy = Strategy::kSemClipTextText;
  const std::vector<SplitDataset> two = {a, b};
  EXPECT_EQ(dataset_totals(two), (DatasetTotals{8, 4}));
}

}  // namespace
}  // namespace newsclip
