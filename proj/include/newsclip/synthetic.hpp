#pragma once

#include <array>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "newsclip/feature_store.hpp"

namespace newsclip {

struct ModalitySynth {
  std::uint32_t dim = 0;
  // Number of Gaussian clusters; 0 draws every row independently (isotropic).
  std::uint32_t clusters = 0;
  // Noise norm relative to the unit-norm cluster centroid.
  double spread = 0.0;
};

struct SynthConfig {
  std::uint32_t n = 1000;
  std::array<ModalitySynth, kModalityCount> modalities = {{
      {512, 16, 0.6},   // CLIP_TEXT (shares CLIP_IMAGE's clusters)
      {512, 16, 0.6},   // CLIP_IMAGE
      {768, 16, 0.6},   // SBERT_TEXT
      {2048, 16, 0.6},  // PLACE_IMAGE
  }};
  // Cluster centroids are the first standard basis vectors instead of random
  // directions (requires clusters <= dim).
  bool orthogonal_centroids = false;
  // CLIP text row = normalize(c * image_row + (1 - c) * own_row), with c drawn
  // per sample from U[clip_coupling, clip_coupling_max] (fixed when they are
  // equal). c = 1 copies the image row exactly; c = 0 makes the text
  // independent of its own image beyond the shared cluster.
  double clip_coupling = 0.0;
  double clip_coupling_max = 1.0;

  std::uint32_t person_pool = 60;
  std::uint32_t other_pool = 4000;
  double person_caption_rate = 0.5;
  std::uint32_t min_entities = 2;
  std::uint32_t max_entities = 4;
  std::uint32_t min_words = 5;
  std::uint32_t max_words = 30;
  double linked_rate = 0.5;

  std::int64_t timestamp_start = 1388534400;  // 2014-01-01T00:00:00Z
  std::uint32_t timestamp_span_days = 1460;

  double person_bbox_rate = 0.9;
  double role_excluded_rate = 0.1;
  double generic_rate = 0.1;
  double image_ok_rate = 1.0;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SynthConfig& config);

// Pure function of (config, seed). Throws Error(kInvalidConfig).
FeatureStore generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace newsclip
