#pragma once

// Centroid-distance selection and the diversity ratio.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "synthaug/common/types.hpp"
#include "synthaug/embedding/backend.hpp"
#include "synthaug/manifest.hpp"

namespace synthaug::embedding {

using ::synthaug::to_json;

// Euclidean distance on raw values, accumulated in double.
double euclidean(std::span<const float> a, std::span<const float> b);
double euclidean(std::span<const double> a, std::span<const float> b);

struct ClassCentroid {
  DefectClass defect_class = DefectClass::kShell;
  std::vector<double> vector;
  std::size_t n_source = 0;
  std::vector<std::string> source_ids;
};

// Per-class arithmetic mean. Throws ConfigError naming an empty class.
std::vector<ClassCentroid> class_centroids(
    const std::map<DefectClass, std::vector<EmbeddingVector>>& real_by_class);

// Throws LeakageError if any centroid source is outside `allowed_ids` (the
// real training fraction).
void check_centroid_sources(std::span<const ClassCentroid> centroids,
                            const std::set<std::string>& allowed_ids);

struct SelectionCandidate {
  std::string candidate_id;
  DefectClass defect_class = DefectClass::kShell;
  std::string image_ref;
  std::vector<float> embedding;
};

struct SelectionConfig {
  int n_per_class = 52;
};

// Per class, the n_per_class candidates closest to that class's centroid,
// ties broken by ascending candidate id. Items carry distance and 1-based rank
// and are ordered by class, then rank. Throws ConfigError when a class pool is
// smaller than n_per_class.
std::vector<ManifestItem> select_top_n(std::span<const SelectionCandidate> candidates,
                                       std::span<const ClassCentroid> centroids,
                                       const SelectionConfig& config);

struct DiversityItem {
  std::vector<float> embedding;
  // One or two reference embeddings.
  std::vector<std::vector<float>> references;
};

struct DiversityReport {
  double d_syn_to_ref = 0.0;
  double d_real_pair = 0.0;
  double ratio = 0.0;
  std::size_t n_synthetic = 0;
  std::size_t n_real = 0;
  std::size_t n_real_pairs = 0;
};

json to_json(const DiversityReport& r);

inline constexpr std::size_t kAllPairsLimit = 100;
inline constexpr std::size_t kSampledPairs = 2000;

// Mean closest-reference distance over synthetic items divided by mean
// distance over real pairs (all pairs up to kAllPairsLimit real images,
// otherwise kSampledPairs seeded random pairs). Throws DataError when the
// real-pair distance is zero.
DiversityReport diversity_ratio(std::span<const DiversityItem> synthetic,
                                std::span<const std::vector<float>> real, std::uint64_t seed);

}  // namespace synthaug::embedding
