#include "newsclip/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "newsclip/error.hpp"

namespace newsclip {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<char, 4> kMagic = {'N', 'C', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderSize = 32;

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

[[noreturn]] void manifest_error(const std::string& what) {
  throw Error(ErrorCode::kManifestParse, what);
}

template <typename T>
T require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) manifest_error(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    manifest_error(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

bool SampleRecord::has_person_entity() const {
  return std::any_of(named_entities.begin(), named_entities.end(),
                     [](const EntityMention& m) { return m.label == EntityLabel::kPerson; });
}

std::uint32_t count_words(std::string_view text) {
  std::uint32_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

EmbeddingMatrix::EmbeddingMatrix(Modality modality, std::uint32_t dim, std::vector<float> data,
                                 bool normalized)
    : modality_(modality), dim_(dim), normalized_(normalized), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorCode::kDimMismatch, "embedding dim must be positive");
  if (data_.size() % dim_ != 0) {
    throw Error(ErrorCode::kDimMismatch, "embedding data is not a whole number of rows");
  }
  rows_ = data_.size() / dim_;
  zero_rows_.resize(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto r = row(i);
    zero_rows_[i] = std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; });
  }
}

FeatureStore::FeatureStore(std::vector<SampleRecord> manifest,
                           std::array<EmbeddingMatrix, kModalityCount> matrices)
    : manifest_(std::move(manifest)), matrices_(std::move(matrices)) {
  for (Modality m : kAllModalities) {
    const auto& mat = matrices_[index_of(m)];
    if (mat.modality() != m) {
      throw Error(ErrorCode::kDimMismatch,
                  std::string("matrix in slot ") + std::string(to_string(m)) + " declares modality " +
                      std::string(to_string(mat.modality())));
    }
    if (mat.rows() != manifest_.size()) {
      throw Error(ErrorCode::kDimMismatch, std::string(to_string(m)) + " has " +
                                               std::to_string(mat.rows()) + " rows but the manifest has " +
                                               std::to_string(manifest_.size()) + " samples");
    }
  }
}

const SampleRecord& FeatureStore::record(SampleId id) const {
  if (!contains(id)) throw Error(ErrorCode::kUnknownId, "sample " + std::to_string(id));
  return manifest_[id];
}

std::string embedding_file_name(Modality m) { return std::string(file_stem(m)) + ".emb"; }

std::string serialize_manifest_line(const SampleRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["source"] = r.source;
  j["timestamp"] = r.timestamp;
  j["caption"] = r.caption;
  j["word_count"] = r.word_count;
  auto ents = ordered_json::array();
  for (const auto& e : r.named_entities) {
    ordered_json ej;
    ej["surface"] = e.surface;
    ej["label"] = to_string(e.label);
    ej["linked_id"] = e.linked_id ? ordered_json(*e.linked_id) : ordered_json(nullptr);
    ents.push_back(std::move(ej));
  }
  j["named_entities"] = std::move(ents);
  j["person_role_excluded"] = r.person_role_excluded;
  j["is_generic_caption"] = r.is_generic_caption;
  j["has_person_bbox"] = r.has_person_bbox;
  j["image_ok"] = r.image_ok;
  return j.dump();
}

SampleRecord parse_manifest_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    manifest_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) manifest_error("record is not a JSON object");
  if (j.size() != 10) manifest_error("record must have exactly 10 fields");

  SampleRecord r;
  r.sample_id = require<SampleId>(j, "sample_id");
  if (!j["sample_id"].is_number_unsigned()) manifest_error("sample_id must be a non-negative integer");
  r.source = require<std::string>(j, "source");
  if (!j["timestamp"].is_number_integer()) manifest_error("timestamp must be an integer");
  r.timestamp = require<std::int64_t>(j, "timestamp");
  r.caption = require<std::string>(j, "caption");
  if (!j["word_count"].is_number_unsigned()) manifest_error("word_count must be a non-negative integer");
  r.word_count = require<std::uint32_t>(j, "word_count");
  r.person_role_excluded = require<bool>(j, "person_role_excluded");
  r.is_generic_caption = require<bool>(j, "is_generic_caption");
  r.has_person_bbox = require<bool>(j, "has_person_bbox");
  r.image_ok = require<bool>(j, "image_ok");

  const auto ents = j.find("named_entities");
  if (ents == j.end() || !ents->is_array()) manifest_error("named_entities must be an array");
  for (const auto& ej : *ents) {
    if (!ej.is_object() || ej.size() != 3) manifest_error("entity must have exactly 3 fields");
    EntityMention m;
    m.surface = require<std::string>(ej, "surface");
    if (m.surface.empty()) manifest_error("entity surface is empty");
    const auto label = parse_entity_label(require<std::string>(ej, "label"));
    if (!label) manifest_error("unknown entity label");
    m.label = *label;
    const auto link = ej.find("linked_id");
    if (link == ej.end()) manifest_error("missing field 'linked_id'");
    if (!link->is_null()) {
      if (!link->is_string()) manifest_error("linked_id must be a string or null");
      m.linked_id = link->get<std::string>();
      if (m.linked_id->empty()) manifest_error("linked_id is present but empty");
    }
    r.named_entities.push_back(std::move(m));
  }
  return r;
}

std::vector<std::uint8_t> serialize_embedding(const EmbeddingMatrix& matrix) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + matrix.data().size() * sizeof(float));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.modality()));
  put_le<std::uint32_t>(out, matrix.dim());
  put_le<std::uint64_t>(out, matrix.rows());
  out.push_back(matrix.normalized() ? 1 : 0);
  out.insert(out.end(), 7, 0);
  const auto* raw = reinterpret_cast<const std::uint8_t*>(matrix.data().data());
  out.insert(out.end(), raw, raw + matrix.data().size() * sizeof(float));
  return out;
}

EmbeddingMatrix parse_embedding(std::span<const std::uint8_t> bytes, Modality expected) {
  const std::string name(to_string(expected));
  if (bytes.size() < kHeaderSize || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kMagicMismatch, name + ": bad magic");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kMagicMismatch, name + ": unsupported version " + std::to_string(version));
  }
  const auto code = get_le<std::uint32_t>(bytes, 8);
  if (code != static_cast<std::uint32_t>(expected)) {
    throw Error(ErrorCode::kMagicMismatch, name + ": modality code " + std::to_string(code));
  }
  const auto flag = bytes[24];
  if (flag > 1 || std::any_of(bytes.begin() + 25, bytes.begin() + kHeaderSize, [](auto b) { return b != 0; })) {
    throw Error(ErrorCode::kMagicMismatch, name + ": malformed header flag/padding");
  }
  const auto dim = get_le<std::uint32_t>(bytes, 12);
  const auto rows = get_le<std::uint64_t>(bytes, 16);
  if (dim == 0) throw Error(ErrorCode::kDimMismatch, name + ": zero dimension");
  const std::size_t payload = bytes.size() - kHeaderSize;
  if (rows > payload / sizeof(float) / dim || payload != rows * dim * sizeof(float)) {
    throw Error(ErrorCode::kDimMismatch, name + ": payload size does not match " + std::to_string(rows) +
                                             " x " + std::to_string(dim));
  }
  std::vector<float> data(rows * dim);
  std::memcpy(data.data(), bytes.data() + kHeaderSize, payload);
  return EmbeddingMatrix(expected, dim, std::move(data), flag == 1);
}

FeatureStore load_store(const std::filesystem::path& root) {
  const auto manifest_path = root / kManifestFileName;
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, manifest_path.string());

  std::vector<SampleRecord> manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    SampleRecord r;
    try {
      r = parse_manifest_line(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kManifestParse, "line " + std::to_string(line_no) + ": " + e.message());
    }
    if (r.sample_id != manifest.size()) {
      throw Error(ErrorCode::kManifestParse, "line " + std::to_string(line_no) + ": expected sample_id " +
                                                 std::to_string(manifest.size()) + ", got " +
                                                 std::to_string(r.sample_id));
    }
    manifest.push_back(std::move(r));
  }

  std::array<EmbeddingMatrix, kModalityCount> matrices;
  for (Modality m : kAllModalities) {
    const auto bytes = read_file(root / embedding_file_name(m));
    matrices[index_of(m)] = parse_embedding(bytes, m);
  }
  return FeatureStore(std::move(manifest), std::move(matrices));
}

void save_store(const FeatureStore& store, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::string text;
  for (const auto& r : store.manifest()) {
    text += serialize_manifest_line(r);
    text += '\n';
  }
  write_file(root / kManifestFileName,
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  for (Modality m : kAllModalities) {
    write_file(root / embedding_file_name(m), serialize_embedding(store.matrix(m)));
  }
}

ValidationReport validate_store(const FeatureStore& store) {
  ValidationReport report;
  auto& density = report.check("id_density");
  auto& words = report.check("word_count");
  auto& norm = report.check("normalization");
  auto& nan = report.check("nan_scan");
  auto& zero = report.check("zero_rows");

  const auto& manifest = store.manifest();
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest[i];
    if (r.sample_id != i) density.offending_ids.push_back(static_cast<SampleId>(i));
    if (r.word_count != count_words(r.caption)) words.offending_ids.push_back(static_cast<SampleId>(i));
  }

  for (Modality m : kAllModalities) {
    const auto& mat = store.matrix(m);
    const bool image_modality = m == Modality::kClipImage || m == Modality::kPlaceImage;
    for (std::size_t i = 0; i < mat.rows(); ++i) {
      const auto id = static_cast<SampleId>(i);
      const auto row = mat.row(i);
      bool finite = true;
      double sq = 0.0;
      for (float v : row) {
        if (!std::isfinite(v)) finite = false;
        sq += static_cast<double>(v) * static_cast<double>(v);
      }
      if (!finite) {
        nan.offending_ids.push_back(id);
        continue;
      }
      if (sq == 0.0) {
        // An unreadable image legitimately has zero image features.
        if (!(image_modality && !manifest[i].image_ok)) zero.offending_ids.push_back(id);
        continue;
      }
      if (mat.normalized() && std::abs(std::sqrt(sq) - 1.0) > kNormTolerance) {
        norm.offending_ids.push_back(id);
      }
    }
  }
  report.normalize();
  return report;
}

}  // namespace newsclip
