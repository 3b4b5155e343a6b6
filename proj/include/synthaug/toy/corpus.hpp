#pragma once

// Procedurally rendered stand-in dataset: strings of porcelain discs on a sky
// background, photographed from 1-3 viewpoints per string. Shell damage is a
// bite out of one disc rim with a white fracture edge; glaze damage is a
// discolored patch flush with the surface, with a light edge.

#include <cstdint>
#include <filesystem>

#include "synthaug/common/json_io.hpp"

namespace synthaug::toy {

struct ToyCorpusConfig {
  int n_groups = 200;
  int min_views = 1;
  int max_views = 3;
  int image_width = 160;
  int image_height = 120;
  // Groups carrying both damage types (dropped during curation).
  int n_dual_defect = 4;
  // Probability that a view also shows a second, undamaged string.
  double second_string_prob = 0.15;
  std::uint64_t seed = 7;
};

struct ToyCorpusSummary {
  int n_groups = 0;
  int n_images = 0;
  int n_annotations = 0;
  int n_dual_defect = 0;
};

json to_json(const ToyCorpusSummary& s);

// Writes `<out>/images/<image_id>.png` and `<out>/annotations.jsonl`.
ToyCorpusSummary write_toy_corpus(const std::filesystem::path& out_dir, const ToyCorpusConfig& config);

}  // namespace synthaug::toy
