#pragma once

#include <limits>
#include <span>
#include <vector>

#include "newsclip/feature_store.hpp"
#include "newsclip/types.hpp"

namespace newsclip {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct StrategySpec {
  Modality query;
  Modality candidate;
  bool ascending;  // lowest score ranks first
};

constexpr StrategySpec spec_of(Strategy s) {
  switch (s) {
    case Strategy::kSemClipTextImage: return {Modality::kClipText, Modality::kClipImage, false};
    case Strategy::kSemClipTextText: return {Modality::kClipText, Modality::kClipText, false};
    case Strategy::kPersonSbertTextText: return {Modality::kSbertText, Modality::kSbertText, true};
    case Strategy::kSceneResnetPlace: return {Modality::kPlaceImage, Modality::kPlaceImage, false};
  }
  return {Modality::kClipText, Modality::kClipImage, false};
}

// Sum of u[i] * v[i], accumulated in double strictly in index order starting
// from 0.0. Every float product is exact in double, so any kernel that keeps
// this per-pair order (with or without FMA) reproduces the same bits.
// Throws Error(kLengthMismatch) on unequal or empty inputs.
double dot(std::span<const float> u, std::span<const float> v);

// dot(query-modality row of q, candidate-modality row of c); -inf when either
// row is all zeros. Operands are always (query row, candidate row).
double strategy_score(const FeatureStore& store, Strategy strategy, SampleId query_id, SampleId candidate_id);

// CLIP text-image score of caption_id's text against image_id's image.
double cti(const FeatureStore& store, SampleId caption_id, SampleId image_id);

// Candidate rows gathered from one matrix and interleaved in groups of
// kPackWidth by dimension, so a query block can stream through them with
// contiguous loads. Zero rows are remembered so their scores become -inf.
class PackedRows {
 public:
  static constexpr std::size_t kPackWidth = 8;

  PackedRows(const EmbeddingMatrix& matrix, std::span<const SampleId> ids);

  std::size_t size() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::span<const SampleId> ids() const { return ids_; }

  // out[q * size() + k] = score of queries[q] against candidate k, for up to
  // kMaxQueries query rows of length dim().
  static constexpr std::size_t kMaxQueries = 4;
  void score(std::span<const std::span<const float>> queries, std::span<double> out) const;

 private:
  std::uint32_t dim_;
  std::vector<SampleId> ids_;
  std::vector<std::uint8_t> zero_;
  std::vector<float> packed_;  // [group][dim][kPackWidth]
};

}  // namespace newsclip
