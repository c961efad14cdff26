#include "newsclip/scoring.hpp"

#include <algorithm>

#include "newsclip/error.hpp"

namespace newsclip {

namespace {

void require_id(const FeatureStore& store, SampleId id) {
  if (!store.contains(id)) throw Error(ErrorCode::kUnknownId, "sample " + std::to_string(id));
}

constexpr std::size_t kW = PackedRows::kPackWidth;

// Q query rows against one packed group of kW candidates. Q is a template
// parameter so the accumulators stay in registers.
template <std::size_t Q>
[[gnu::always_inline]] inline void score_group(const float* const* queries, const float* group, std::uint32_t dim, double* acc) {
  double local[Q][kW] = {};
  for (std::uint32_t d = 0; d < dim; ++d) {
    const float* c = group + std::size_t{d} * kW;
    for (std::size_t q = 0; q < Q; ++q) {
      const double qv = queries[q][d];
      for (std::size_t k = 0; k < kW; ++k) local[q][k] += qv * static_cast<double>(c[k]);
    }
  }
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t k = 0; k < kW; ++k) acc[q * kW + k] = local[q][k];
  }
}

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define NEWSCLIP_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define NEWSCLIP_CLONES
#endif

NEWSCLIP_CLONES void score_group1(const float* const* q, const float* g, std::uint32_t dim, double* acc) {
  score_group<1>(q, g, dim, acc);
}
NEWSCLIP_CLONES void score_group2(const float* const* q, const float* g, std::uint32_t dim, double* acc) {
  score_group<2>(q, g, dim, acc);
}
NEWSCLIP_CLONES void score_group3(const float* const* q, const float* g, std::uint32_t dim, double* acc) {
  score_group<3>(q, g, dim, acc);
}
NEWSCLIP_CLONES void score_group4(const float* const* q, const float* g, std::uint32_t dim, double* acc) {
  score_group<4>(q, g, dim, acc);
}

}  // namespace

double dot(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size() || u.empty()) {
    throw Error(ErrorCode::kLengthMismatch,
                "dot of lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

double strategy_score(const FeatureStore& store, Strategy strategy, SampleId query_id, SampleId candidate_id) {
  require_id(store, query_id);
  require_id(store, candidate_id);
  const auto spec = spec_of(strategy);
  const auto& qm = store.matrix(spec.query);
  const auto& cm = store.matrix(spec.candidate);
  if (qm.is_zero_row(query_id) || cm.is_zero_row(candidate_id)) return kNegInf;
  return dot(qm.row(query_id), cm.row(candidate_id));
}

double cti(const FeatureStore& store, SampleId caption_id, SampleId image_id) {
  require_id(store, caption_id);
  require_id(store, image_id);
  const auto& text = store.matrix(Modality::kClipText);
  const auto& image = store.matrix(Modality::kClipImage);
  if (text.is_zero_row(caption_id) || image.is_zero_row(image_id)) return kNegInf;
  return dot(text.row(caption_id), image.row(image_id));
}

PackedRows::PackedRows(const EmbeddingMatrix& matrix, std::span<const SampleId> ids)
    : dim_(matrix.dim()), ids_(ids.begin(), ids.end()), zero_(ids.size()) {
  const std::size_t groups = (ids_.size() + kW - 1) / kW;
  packed_.assign(groups * dim_ * kW, 0.0f);
  for (std::size_t k = 0; k < ids_.size(); ++k) {
    if (ids_[k] >= matrix.rows()) throw Error(ErrorCode::kUnknownId, "sample " + std::to_string(ids_[k]));
    zero_[k] = matrix.is_zero_row(ids_[k]);
    const auto row = matrix.row(ids_[k]);
    float* base = packed_.data() + (k / kW) * dim_ * kW + (k % kW);
    for (std::uint32_t d = 0; d < dim_; ++d) base[std::size_t{d} * kW] = row[d];
  }
}

void PackedRows::score(std::span<const std::span<const float>> queries, std::span<double> out) const {
  const std::size_t nq = queries.size();
  if (nq == 0 || nq > kMaxQueries) throw Error(ErrorCode::kLengthMismatch, "query block size");
  if (out.size() < nq * ids_.size()) throw Error(ErrorCode::kLengthMismatch, "score buffer too small");
  const float* qptr[kMaxQueries] = {};
  for (std::size_t q = 0; q < nq; ++q) {
    if (queries[q].size() != dim_) throw Error(ErrorCode::kLengthMismatch, "query row length");
    qptr[q] = queries[q].data();
  }

  double acc[kMaxQueries * kW];
  const std::size_t groups = (ids_.size() + kW - 1) / kW;
  for (std::size_t g = 0; g < groups; ++g) {
    const float* group = packed_.data() + g * dim_ * kW;
    switch (nq) {
      case 1: score_group1(qptr, group, dim_, acc); break;
      case 2: score_group2(qptr, group, dim_, acc); break;
      case 3: score_group3(qptr, group, dim_, acc); break;
      default: score_group4(qptr, group, dim_, acc); break;
    }
    const std::size_t valid = std::min(kW, ids_.size() - g * kW);
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t k = 0; k < valid; ++k) {
        const std::size_t idx = g * kW + k;
        out[q * ids_.size() + idx] = zero_[idx] ? kNegInf : acc[q * kW + k];
      }
    }
  }
}

}  // namespace newsclip
