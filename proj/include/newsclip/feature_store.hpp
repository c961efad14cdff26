#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "newsclip/types.hpp"
#include "newsclip/validation.hpp"

namespace newsclip {

struct EntityMention {
  std::string surface;
  EntityLabel label = EntityLabel::kOther;
  std::optional<std::string> linked_id;

  bool operator==(const EntityMention&) const = default;
};

// One pristine image-caption pair. The boolean flags are judgments made by
// the upstream extractor and are consumed here as ground truth.
struct SampleRecord {
  SampleId sample_id = 0;
  std::string source;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  std::string caption;
  std::uint32_t word_count = 0;
  std::vector<EntityMention> named_entities;
  bool person_role_excluded = false;
  bool is_generic_caption = false;
  bool has_person_bbox = false;
  bool image_ok = true;

  bool has_person_entity() const;
  bool operator==(const SampleRecord&) const = default;
};

// Number of ASCII-whitespace separated tokens.
std::uint32_t count_words(std::string_view text);

inline constexpr double kNormTolerance = 1e-4;

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(Modality modality, std::uint32_t dim, std::vector<float> data, bool normalized);

  Modality modality() const { return modality_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t rows() const { return rows_; }
  bool normalized() const { return normalized_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> data() const { return data_; }

  // True iff every element of the row is zero; precomputed at construction.
  bool is_zero_row(std::size_t i) const { return zero_rows_[i] != 0; }

 private:
  Modality modality_ = Modality::kClipText;
  std::uint32_t dim_ = 0;
  std::size_t rows_ = 0;
  bool normalized_ = false;
  std::vector<float> data_;
  std::vector<std::uint8_t> zero_rows_;
};

// Manifest plus the four embedding matrices. Immutable once constructed, so a
// single instance may be shared by any number of reader threads.
class FeatureStore {
 public:
  // Throws Error(kDimMismatch) if a matrix row count differs from the manifest
  // size or a matrix is filed under the wrong modality.
  FeatureStore(std::vector<SampleRecord> manifest, std::array<EmbeddingMatrix, kModalityCount> matrices);

  std::size_t size() const { return manifest_.size(); }
  const std::vector<SampleRecord>& manifest() const { return manifest_; }
  const SampleRecord& record(SampleId id) const;  // throws kUnknownId
  const EmbeddingMatrix& matrix(Modality m) const { return matrices_[index_of(m)]; }

  bool contains(SampleId id) const { return id < manifest_.size(); }

 private:
  std::vector<SampleRecord> manifest_;
  std::array<EmbeddingMatrix, kModalityCount> matrices_;
};

inline constexpr std::string_view kManifestFileName = "manifest.jsonl";
std::string embedding_file_name(Modality m);

// Loads and structurally validates a store directory.
FeatureStore load_store(const std::filesystem::path& root);

// Writes the canonical on-disk form. Loading and re-saving a canonical store
// reproduces its bytes exactly.
void save_store(const FeatureStore& store, const std::filesystem::path& root);

std::string serialize_manifest_line(const SampleRecord& record);
SampleRecord parse_manifest_line(std::string_view line);

std::vector<std::uint8_t> serialize_embedding(const EmbeddingMatrix& matrix);
EmbeddingMatrix parse_embedding(std::span<const std::uint8_t> bytes, Modality expected);

// Checks: id_density, word_count, normalization, nan_scan, zero_rows.
ValidationReport validate_store(const FeatureStore& store);

}  // namespace newsclip
