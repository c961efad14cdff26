#include "newsclip/synthetic.hpp"

#include <algorithm>
#include <set>
#include <cmath>
#include <string>

#include "newsclip/error.hpp"
#include "newsclip/random.hpp"

namespace newsclip {

namespace {

constexpr std::array<const char*, 4> kSources = {"guardian", "bbc", "usa_today", "washington_post"};
constexpr std::array<EntityLabel, 6> kOtherLabels = {EntityLabel::kGpe,   EntityLabel::kOrg,
                                                     EntityLabel::kLoc,   EntityLabel::kEvent,
                                                     EntityLabel::kDate,  EntityLabel::kOther};
constexpr std::uint32_t kFillerVocabulary = 500;

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must lie in [0, 1]");
  }
}

void validate(const SynthConfig& c) {
  if (c.n == 0) throw Error(ErrorCode::kInvalidConfig, "n must be at least 1");
  for (Modality m : kAllModalities) {
    const auto& mc = c.modalities[index_of(m)];
    if (mc.dim == 0) throw Error(ErrorCode::kInvalidConfig, std::string(to_string(m)) + " dim is 0");
    if (!(mc.spread >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "spread must be non-negative");
    if (c.orthogonal_centroids && mc.clusters > mc.dim) {
      throw Error(ErrorCode::kInvalidConfig, "orthogonal centroids need clusters <= dim");
    }
  }
  if (c.modalities[index_of(Modality::kClipText)].dim != c.modalities[index_of(Modality::kClipImage)].dim) {
    throw Error(ErrorCode::kInvalidConfig, "CLIP text and image dims must agree");
  }
  check_rate(c.clip_coupling, "clip_coupling");
  check_rate(c.clip_coupling_max, "clip_coupling_max");
  if (c.clip_coupling_max < c.clip_coupling) {
    throw Error(ErrorCode::kInvalidConfig, "clip_coupling_max below clip_coupling");
  }
  check_rate(c.person_caption_rate, "person_caption_rate");
  check_rate(c.linked_rate, "linked_rate");
  check_rate(c.person_bbox_rate, "person_bbox_rate");
  check_rate(c.role_excluded_rate, "role_excluded_rate");
  check_rate(c.generic_rate, "generic_rate");
  check_rate(c.image_ok_rate, "image_ok_rate");
  if (c.min_entities > c.max_entities || c.min_words > c.max_words) {
    throw Error(ErrorCode::kInvalidConfig, "min exceeds max");
  }
  if (c.person_caption_rate > 0.0 && c.person_pool == 0) {
    throw Error(ErrorCode::kInvalidConfig, "person_pool is empty");
  }
  if (c.other_pool < c.max_entities) {
    throw Error(ErrorCode::kInvalidConfig, "other_pool smaller than max_entities");
  }
  if (c.timestamp_span_days == 0) throw Error(ErrorCode::kInvalidConfig, "timestamp span is 0");
}

void normalize_into(std::span<const double> v, std::span<float> out) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
}

std::vector<double> random_direction(Rng& rng, std::uint32_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Cluster centroids (unit length) for one modality.
std::vector<std::vector<double>> make_centroids(Rng& rng, const ModalitySynth& mc, bool orthogonal) {
  std::vector<std::vector<double>> out;
  out.reserve(mc.clusters);
  for (std::uint32_t k = 0; k < mc.clusters; ++k) {
    std::vector<double> c(mc.dim, 0.0);
    if (orthogonal) {
      c[k] = 1.0;
    } else {
      c = random_direction(rng, mc.dim);
      double sq = 0.0;
      for (double x : c) sq += x * x;
      for (double& x : c) x /= std::sqrt(sq);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// Unnormalized row: centroid + spread * isotropic noise of expected norm spread.
std::vector<double> draw_row(Rng& rng, const ModalitySynth& mc,
                             const std::vector<std::vector<double>>& centroids, std::uint32_t cluster) {
  if (mc.clusters == 0) return random_direction(rng, mc.dim);
  std::vector<double> v = centroids[cluster];
  if (mc.spread > 0.0) {
    const double scale = mc.spread / std::sqrt(static_cast<double>(mc.dim));
    for (double& x : v) x += scale * rng.normal();
  }
  return v;
}

}  // namespace

FeatureStore generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  const std::uint32_t n = config.n;

  // Entity pools: persons first, then other labels; links are a per-entity
  // property so that every mention of an entity links the same way.
  Rng pool_rng(mix_seed(seed, 1));
  std::vector<bool> person_linked(config.person_pool), other_linked(config.other_pool);
  for (std::uint32_t k = 0; k < config.person_pool; ++k) person_linked[k] = pool_rng.bernoulli(config.linked_rate);
  for (std::uint32_t k = 0; k < config.other_pool; ++k) other_linked[k] = pool_rng.bernoulli(config.linked_rate);

  Rng rec_rng(mix_seed(seed, 2));
  std::vector<SampleRecord> manifest;
  manifest.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.sample_id = i;
    r.source = kSources[i % kSources.size()];
    r.timestamp = config.timestamp_start +
                  static_cast<std::int64_t>(rec_rng.below(config.timestamp_span_days)) * 86400;

    const auto entity_count =
        static_cast<std::uint32_t>(rec_rng.between(config.min_entities, config.max_entities));
    const bool with_person = entity_count > 0 && rec_rng.bernoulli(config.person_caption_rate);
    if (with_person) {
      const auto k = static_cast<std::uint32_t>(rec_rng.below(config.person_pool));
      EntityMention m{"Person" + std::to_string(k), EntityLabel::kPerson, std::nullopt};
      if (person_linked[k]) m.linked_id = "QP" + std::to_string(k);
      r.named_entities.push_back(std::move(m));
    }
    std::vector<std::uint32_t> picked;
    while (r.named_entities.size() < entity_count) {
      const auto k = static_cast<std::uint32_t>(rec_rng.below(config.other_pool));
      if (std::find(picked.begin(), picked.end(), k) != picked.end()) continue;
      picked.push_back(k);
      EntityMention m{"Entity" + std::to_string(k), kOtherLabels[k % kOtherLabels.size()], std::nullopt};
      if (other_linked[k]) m.linked_id = "QE" + std::to_string(k);
      r.named_entities.push_back(std::move(m));
    }

    const auto target_words = static_cast<std::uint32_t>(rec_rng.between(config.min_words, config.max_words));
    for (const auto& m : r.named_entities) {
      if (!r.caption.empty()) r.caption += ' ';
      r.caption += m.surface;
    }
    for (auto w = static_cast<std::uint32_t>(r.named_entities.size()); w < target_words; ++w) {
      if (!r.caption.empty()) r.caption += ' ';
      r.caption += "w" + std::to_string(rec_rng.below(kFillerVocabulary));
    }
    r.word_count = count_words(r.caption);

    r.has_person_bbox = rec_rng.bernoulli(config.person_bbox_rate);
    const bool role = rec_rng.bernoulli(config.role_excluded_rate);
    r.person_role_excluded = with_person && role;
    r.is_generic_caption = rec_rng.bernoulli(config.generic_rate);
    r.image_ok = rec_rng.bernoulli(config.image_ok_rate);
    manifest.push_back(std::move(r));
  }

  // Embeddings. CLIP text and image share the CLIP cluster structure.
  const auto& clip_cfg = config.modalities[index_of(Modality::kClipImage)];
  const auto& text_cfg = config.modalities[index_of(Modality::kClipText)];
  const auto& sbert_cfg = config.modalities[index_of(Modality::kSbertText)];
  const auto& place_cfg = config.modalities[index_of(Modality::kPlaceImage)];

  Rng emb_rng(mix_seed(seed, 3));
  const auto clip_centroids = make_centroids(emb_rng, clip_cfg, config.orthogonal_centroids);
  const auto text_centroids =
      text_cfg.clusters == clip_cfg.clusters ? clip_centroids
                                             : make_centroids(emb_rng, text_cfg, config.orthogonal_centroids);
  const auto sbert_centroids = make_centroids(emb_rng, sbert_cfg, config.orthogonal_centroids);
  const auto place_centroids = make_centroids(emb_rng, place_cfg, config.orthogonal_centroids);

  std::vector<float> clip_text(std::size_t{n} * clip_cfg.dim);
  std::vector<float> clip_image(std::size_t{n} * clip_cfg.dim);
  std::vector<float> sbert(std::size_t{n} * sbert_cfg.dim);
  std::vector<float> place(std::size_t{n} * place_cfg.dim);

  for (std::uint32_t i = 0; i < n; ++i) {
    const bool image_ok = manifest[i].image_ok;
    const auto clip_cluster = clip_cfg.clusters ? static_cast<std::uint32_t>(emb_rng.below(clip_cfg.clusters)) : 0;
    const auto image_raw = draw_row(emb_rng, clip_cfg, clip_centroids, clip_cluster);
    std::span<float> image_row(clip_image.data() + std::size_t{i} * clip_cfg.dim, clip_cfg.dim);
    std::span<float> text_row(clip_text.data() + std::size_t{i} * clip_cfg.dim, clip_cfg.dim);
    normalize_into(image_raw, image_row);

    const double coupling = config.clip_coupling_max > config.clip_coupling
                                ? config.clip_coupling +
                                      (config.clip_coupling_max - config.clip_coupling) * emb_rng.uniform()
                                : config.clip_coupling;
    if (coupling == 1.0) {
      std::copy(image_row.begin(), image_row.end(), text_row.begin());
    } else {
      const auto text_cluster =
          text_cfg.clusters ? (text_cfg.clusters == clip_cfg.clusters
                                   ? clip_cluster
                                   : static_cast<std::uint32_t>(emb_rng.below(text_cfg.clusters)))
                            : 0;
      const auto own = draw_row(emb_rng, text_cfg, text_centroids, text_cluster);
      std::vector<float> own_unit(clip_cfg.dim);
      normalize_into(own, own_unit);
      std::vector<double> mixed(clip_cfg.dim);
      for (std::uint32_t d = 0; d < clip_cfg.dim; ++d) {
        mixed[d] = coupling * image_row[d] + (1.0 - coupling) * own_unit[d];
      }
      normalize_into(mixed, text_row);
    }
    if (!image_ok) std::fill(image_row.begin(), image_row.end(), 0.0f);

    const auto sbert_cluster = sbert_cfg.clusters ? static_cast<std::uint32_t>(emb_rng.below(sbert_cfg.clusters)) : 0;
    normalize_into(draw_row(emb_rng, sbert_cfg, sbert_centroids, sbert_cluster),
                   std::span<float>(sbert.data() + std::size_t{i} * sbert_cfg.dim, sbert_cfg.dim));

    const auto place_cluster = place_cfg.clusters ? static_cast<std::uint32_t>(emb_rng.below(place_cfg.clusters)) : 0;
    std::span<float> place_row(place.data() + std::size_t{i} * place_cfg.dim, place_cfg.dim);
    normalize_into(draw_row(emb_rng, place_cfg, place_centroids, place_cluster), place_row);
    if (!image_ok) std::fill(place_row.begin(), place_row.end(), 0.0f);
  }

  std::array<EmbeddingMatrix, kModalityCount> matrices = {
      EmbeddingMatrix(Modality::kClipText, clip_cfg.dim, std::move(clip_text), true),
      EmbeddingMatrix(Modality::kClipImage, clip_cfg.dim, std::move(clip_image), true),
      EmbeddingMatrix(Modality::kSbertText, sbert_cfg.dim, std::move(sbert), true),
      EmbeddingMatrix(Modality::kPlaceImage, place_cfg.dim, std::move(place), true),
  };
  return FeatureStore(std::move(manifest), std::move(matrices));
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKnown = {
      "n",           "modalities",  "orthogonal_centroids", "clip_coupling",      "clip_coupling_max",
      "person_pool", "other_pool",  "person_caption_rate",  "min_entities",       "max_entities",
      "min_words",   "max_words",   "linked_rate",          "timestamp_start",    "timestamp_span_days",
      "person_bbox_rate", "role_excluded_rate", "generic_rate", "image_ok_rate"};
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "synthetic config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw Error(ErrorCode::kInvalidConfig, "unknown synthetic config key '" + key + "'");
  }
  SynthConfig c;
  auto get_from = [](const nlohmann::json& obj, const std::string& key, auto& field) {
    if (auto it = obj.find(key); it != obj.end()) {
      try {
        it->get_to(field);
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::kInvalidConfig, "bad value for '" + key + "'");
      }
    }
  };
  auto get = [&](const char* key, auto& field) { get_from(j, key, field); };
  get("n", c.n);
  if (auto it = j.find("modalities"); it != j.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kInvalidConfig, "'modalities' must be an object keyed by modality");
    for (const auto& [key, mj] : it->items()) {
      const auto m = std::find_if(kAllModalities.begin(), kAllModalities.end(),
                                  [&](Modality x) { return file_stem(x) == key; });
      if (m == kAllModalities.end()) throw Error(ErrorCode::kInvalidConfig, "unknown modality '" + key + "'");
      if (!mj.is_object()) throw Error(ErrorCode::kInvalidConfig, "modality '" + key + "' must be an object");
      for (const auto& [field, _] : mj.items()) {
        if (field != "dim" && field != "clusters" && field != "spread") {
          throw Error(ErrorCode::kInvalidConfig, "unknown key '" + field + "' in modality '" + key + "'");
        }
      }
      auto& mc = c.modalities[index_of(*m)];
      get_from(mj, "dim", mc.dim);
      get_from(mj, "clusters", mc.clusters);
      get_from(mj, "spread", mc.spread);
    }
  }
  get("orthogonal_centroids", c.orthogonal_centroids);
  get("clip_coupling", c.clip_coupling);
  get("clip_coupling_max", c.clip_coupling_max);
  get("person_pool", c.person_pool);
  get("other_pool", c.other_pool);
  get("person_caption_rate", c.person_caption_rate);
  get("min_entities", c.min_entities);
  get("max_entities", c.max_entities);
  get("min_words", c.min_words);
  get("max_words", c.max_words);
  get("linked_rate", c.linked_rate);
  get("timestamp_start", c.timestamp_start);
  get("timestamp_span_days", c.timestamp_span_days);
  get("person_bbox_rate", c.person_bbox_rate);
  get("role_excluded_rate", c.role_excluded_rate);
  get("generic_rate", c.generic_rate);
  get("image_ok_rate", c.image_ok_rate);
  return c;
}

nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  for (Modality m : kAllModalities) {
    const auto& mc = c.modalities[index_of(m)];
    j["modalities"][std::string(file_stem(m))] = {{"dim", mc.dim}, {"clusters", mc.clusters}, {"spread", mc.spread}};
  }
  j["orthogonal_centroids"] = c.orthogonal_centroids;
  j["clip_coupling"] = c.clip_coupling;
  j["clip_coupling_max"] = c.clip_coupling_max;
  j["person_pool"] = c.person_pool;
  j["other_pool"] = c.other_pool;
  j["person_caption_rate"] = c.person_caption_rate;
  j["min_entities"] = c.min_entities;
  j["max_entities"] = c.max_entities;
  j["min_words"] = c.min_words;
  j["max_words"] = c.max_words;
  j["linked_rate"] = c.linked_rate;
  j["timestamp_start"] = c.timestamp_start;
  j["timestamp_span_days"] = c.timestamp_span_days;
  j["person_bbox_rate"] = c.person_bbox_rate;
  j["role_excluded_rate"] = c.role_excluded_rate;
  j["generic_rate"] = c.generic_rate;
  j["image_ok_rate"] = c.image_ok_rate;
  return j;
}

}  // namespace newsclip
