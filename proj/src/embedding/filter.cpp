#include "synthaug/embedding/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/random.hpp"

namespace synthaug::embedding {

namespace {

template <typename A>
double euclidean_impl(std::span<const A> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DataError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

double euclidean(std::span<const float> a, std::span<const float> b) { return euclidean_impl(a, b); }
double euclidean(std::span<const double> a, std::span<const float> b) { return euclidean_impl(a, b); }

std::vector<ClassCentroid> class_centroids(
    const std::map<DefectClass, std::vector<EmbeddingVector>>& real_by_class) {
  std::vector<ClassCentroid> out;
  for (auto cls : kAllClasses) {
    auto it = real_by_class.find(cls);
    if (it == real_by_class.end() || it->second.empty()) {
      throw ConfigError("no real training embeddings for class '" + std::string(to_string(cls)) + "'");
    }
    const auto& vecs = it->second;
    ClassCentroid c;
    c.defect_class = cls;
    c.vector.assign(vecs.front().values.size(), 0.0);
    for (const auto& v : vecs) {
      if (v.values.size() != c.vector.size()) throw DataError("dimension mismatch in embedding " + v.image_id);
      for (std::size_t i = 0; i < v.values.size(); ++i) c.vector[i] += v.values[i];
      c.source_ids.push_back(v.image_id);
    }
    for (auto& x : c.vector) x /= static_cast<double>(vecs.size());
    c.n_source = vecs.size();
    out.push_back(std::move(c));
  }
  return out;
}

void check_centroid_sources(std::span<const ClassCentroid> centroids, const std::set<std::string>& allowed_ids) {
  for (const auto& c : centroids) {
    for (const auto& id : c.source_ids) {
      if (!allowed_ids.contains(id)) {
        throw LeakageError("centroid for '" + std::string(to_string(c.defect_class)) + "' uses '" + id +
                           "', which is not in the real training fraction");
      }
    }
  }
}

std::vector<ManifestItem> select_top_n(std::span<const SelectionCandidate> candidates,
                                       std::span<const ClassCentroid> centroids,
                                       const SelectionConfig& config) {
  if (config.n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  std::vector<ManifestItem> out;
  for (auto cls : kAllClasses) {
    auto cit = std::find_if(centroids.begin(), centroids.end(),
                            [&](const ClassCentroid& c) { return c.defect_class == cls; });
    if (cit == centroids.end()) throw ConfigError("no centroid for class '" + std::string(to_string(cls)) + "'");

    std::vector<std::pair<double, const SelectionCandidate*>> ranked;
    for (const auto& cand : candidates) {
      if (cand.defect_class != cls) continue;
      ranked.emplace_back(euclidean(std::span<const double>(cit->vector), cand.embedding), &cand);
    }
    const auto n = static_cast<std::size_t>(config.n_per_class);
    if (n > ranked.size()) {
      throw ConfigError("n_per_class=" + std::to_string(n) + " exceeds the " + std::string(to_string(cls)) +
                        " pool (" + std::to_string(ranked.size()) + " available)");
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->candidate_id < b.second->candidate_id;
    });
    for (std::size_t i = 0; i < n; ++i) {
      const auto& cand = *ranked[i].second;
      ManifestItem item;
      item.image_id = cand.candidate_id;
      item.image_ref = cand.image_ref;
      item.label_vector = one_hot(cls);
      item.source = Source::kSynthetic;
      item.transform_policy = std::string(kPolicySyntheticTrain);
      item.distance = ranked[i].first;
      item.rank = static_cast<int>(i) + 1;
      out.push_back(std::move(item));
    }
  }
  return out;
}

json to_json(const DiversityReport& r) {
  return {{"d_syn_to_ref", r.d_syn_to_ref}, {"d_real_pair", r.d_real_pair},   {"ratio", r.ratio},
          {"n_synthetic", r.n_synthetic},   {"n_real", r.n_real},             {"n_real_pairs", r.n_real_pairs}};
}

DiversityReport diversity_ratio(std::span<const DiversityItem> synthetic, std::span<const std::vector<float>> real,
                                std::uint64_t seed) {
  if (synthetic.empty()) throw DataError("diversity ratio needs at least one synthetic item");
  if (real.size() < 2) throw DataError("diversity ratio needs at least two real embeddings");
  DiversityReport r;
  r.n_synthetic = synthetic.size();
  r.n_real = real.size();

  double syn_sum = 0.0;
  for (const auto& item : synthetic) {
    if (item.references.empty()) throw DataError("synthetic item without reference embeddings");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ref : item.references) best = std::min(best, euclidean(item.embedding, ref));
    syn_sum += best;
  }
  r.d_syn_to_ref = syn_sum / static_cast<double>(synthetic.size());

  double pair_sum = 0.0;
  if (real.size() <= kAllPairsLimit) {
    for (std::size_t i = 0; i < real.size(); ++i) {
      for (std::size_t j = i + 1; j < real.size(); ++j) {
        pair_sum += euclidean(real[i], real[j]);
        ++r.n_real_pairs;
      }
    }
  } else {
    Rng rng(mix_seed(seed, "real_pairs"));
    for (std::size_t k = 0; k < kSampledPairs; ++k) {
      const auto i = uniform_index(rng, real.size());
      auto j = uniform_index(rng, real.size() - 1);
      if (j >= i) ++j;
      pair_sum += euclidean(real[i], real[j]);
      ++r.n_real_pairs;
    }
  }
  r.d_real_pair = pair_sum / static_cast<double>(r.n_real_pairs);
  if (!(r.d_real_pair > 0.0)) throw DataError("diversity ratio undefined: real-pair distance is zero");
  r.ratio = r.d_syn_to_ref / r.d_real_pair;
  return r;
}

}  // namespace synthaug::embedding
