#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/common/json_io.hpp"
#include "synthaug/embedding/backend.hpp"
#include "synthaug/embedding/filter.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::embedding;
using synthaug::testing::noise_image;
using synthaug::testing::TempDir;

// ---------------------------------------------------------------- backends

TEST(HashProjection, DeterministicFixedDimension) {
  const HashProjectionBackend backend(64, 3);
  const std::vector<cv::Mat> imgs{noise_image(30, 20, 1), noise_image(30, 20, 1), noise_image(25, 25, 2)};
  const auto v = backend.embed_batch(imgs);
  ASSERT_EQ(v.size(), 3u);
  for (const auto& x : v) EXPECT_EQ(x.size(), 64u);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NE(v[0], v[2]);
  EXPECT_TRUE(backend.embed_batch({}).empty());
  EXPECT_NE(HashProjectionBackend(64, 4).embed_batch(imgs)[0], v[0]);
}

TEST(HashProjection, NearbyImagesStayNearby) {
  const HashProjectionBackend backend(128, 0);
  const cv::Mat a = noise_image(32, 32, 7);
  cv::Mat b = a.clone();
  b.at<cv::Vec3b>(3, 3) = cv::Vec3b(0, 0, 0);
  const cv::Mat c = noise_image(32, 32, 8);
  const auto v = backend.embed_batch(std::vector<cv::Mat>{a, b, c});
  EXPECT_LT(euclidean(v[0], v[1]) * 10, euclidean(v[0], v[2]));
}

TEST(EmbedImages, PerItemErrorsDoNotStopTheRest) {
  TempDir dir;
  save_png(dir / "a.png", noise_image(16, 16, 1));
  save_png(dir / "c.png", noise_image(16, 16, 2));
  write_text_file(dir / "b.png", "not an image");
  const HashProjectionBackend backend(16, 0);
  const std::vector<ImageRef> refs{{"a", dir / "a.png"}, {"b", dir / "b.png"}, {"c", dir / "c.png"}, {"d", dir / "none.png"}};
  const auto out = embed_images(backend, refs, 2);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_TRUE(out[0].vector.has_value());
  EXPECT_FALSE(out[1].vector.has_value());
  EXPECT_FALSE(out[1].error.empty());
  EXPECT_TRUE(out[2].vector.has_value());
  EXPECT_FALSE(out[3].vector.has_value());
  EXPECT_EQ(out[2].image_id, "c");
}

TEST(EmbedImages, CacheReturnsSameVectorsAndWritesVecFiles) {
  TempDir dir;
  save_png(dir / "a.png", noise_image(16, 16, 1));
  const HashProjectionBackend backend(16, 0);
  const std::vector<ImageRef> refs{{"a", dir / "a.png"}};
  const auto first = embed_images_cached(backend, refs, dir / "cache");
  EXPECT_TRUE(fs::exists(dir / "cache" / backend.name() / "a.vec"));
  // A cached vector is served even if the source disappears.
  fs::remove(dir / "a.png");
  const auto second = embed_images_cached(backend, refs, dir / "cache");
  ASSERT_TRUE(second[0].vector.has_value());
  EXPECT_EQ(second[0].vector->values, first[0].vector->values);
}

TEST(VecFile, RoundTripAndLayout) {
  TempDir dir;
  const std::vector<float> v{1.5f, -2.0f, 0.0f, 3.25f};
  write_vec(dir / "x.vec", v);
  EXPECT_EQ(read_vec(dir / "x.vec"), v);
  EXPECT_EQ(fs::file_size(dir / "x.vec"), 4u + 4u * 4u);
  const std::string bytes = read_text_file(dir / "x.vec");
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 4u);  // little-endian length
  write_text_file(dir / "bad.vec", std::string("\x09\x00\x00\x00", 4));
  EXPECT_THROW(read_vec(dir / "bad.vec"), DataError);
}

// ---------------------------------------------------------------- centroids

EmbeddingVector ev(const std::string& id, std::vector<float> v) { return {id, std::move(v)}; }

TEST(Centroids, MeanPerClass) {
  std::map<DefectClass, std::vector<EmbeddingVector>> real;
  real[DefectClass::kShell] = {ev("s1", {0, 0}), ev("s2", {2, 4})};
  real[DefectClass::kGlaze] = {ev("g1", {5, -1})};
  const auto c = class_centroids(real);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].vector, (std::vector<double>{1, 2}));
  EXPECT_EQ(c[1].vector, (std::vector<double>{5, -1}));
  EXPECT_EQ(c[0].n_source, 2u);
  real[DefectClass::kGlaze].clear();
  EXPECT_THROW(class_centroids(real), ConfigError);
}

TEST(Centroids, SourcesMustBeRealTrainingIds) {
  std::map<DefectClass, std::vector<EmbeddingVector>> real;
  real[DefectClass::kShell] = {ev("s1", {0})};
  real[DefectClass::kGlaze] = {ev("test-7", {1})};
  const auto c = class_centroids(real);
  EXPECT_THROW(check_centroid_sources(c, {"s1"}), LeakageError);
  EXPECT_NO_THROW(check_centroid_sources(c, {"s1", "test-7"}));
}

// ---------------------------------------------------------------- selection

// Repeatedly takes the smallest (squared distance, id) of what is left.
std::vector<std::string> oracle_select(const std::vector<SelectionCandidate>& pool, const ClassCentroid& centroid,
                                       std::size_t n) {
  std::vector<std::pair<long double, std::string>> left;
  for (const auto& c : pool) {
    if (c.defect_class != centroid.defect_class) continue;
    long double d2 = 0;
    for (std::size_t i = 0; i < c.embedding.size(); ++i) {
      const long double d = static_cast<long double>(c.embedding[i]) - centroid.vector[i];
      d2 += d * d;
    }
    left.emplace_back(d2, c.candidate_id);
  }
  std::vector<std::string> out;
  while (out.size() < n) {
    auto best = left.begin();
    for (auto it = left.begin(); it != left.end(); ++it) {
      if (it->first < best->first || (it->first == best->first && it->second < best->second)) best = it;
    }
    out.push_back(best->second);
    left.erase(best);
  }
  return out;
}

std::vector<SelectionCandidate> lattice_pool(Rng& rng, std::size_t n, int dim) {
  std::vector<SelectionCandidate> pool;
  for (std::size_t i = 0; i < n; ++i) {
    SelectionCandidate c;
    c.candidate_id = "c" + std::to_string(uniform_index(rng, 1u << 30)) + "_" + std::to_string(i);
    c.defect_class = bernoulli(rng, 0.5) ? DefectClass::kShell : DefectClass::kGlaze;
    c.image_ref = c.candidate_id + ".png";
    // Small integer coordinates make exact distance ties common.
    for (int d = 0; d < dim; ++d) c.embedding.push_back(static_cast<float>(uniform_index(rng, 4)));
    pool.push_back(c);
  }
  return pool;
}

std::vector<ClassCentroid> lattice_centroids(int dim) {
  return {{DefectClass::kShell, std::vector<double>(dim, 1.0), 1, {}},
          {DefectClass::kGlaze, std::vector<double>(dim, 2.0), 1, {}}};
}

std::vector<std::string> ids_of(const std::vector<ManifestItem>& items, DefectClass c) {
  std::vector<std::string> out;
  for (const auto& i : items) {
    if (i.defect_class() == c) out.push_back(i.image_id);
  }
  return out;
}

TEST(SelectTopN, PropertyMatchesOracleIncludingTies) {
  Rng rng(404);
  const int dim = 3;
  const auto centroids = lattice_centroids(dim);
  for (int trial = 0; trial < 60; ++trial) {
    const auto pool = lattice_pool(rng, 20 + uniform_index(rng, 200), dim);
    std::size_t smallest = pool.size();
    for (auto c : kAllClasses) {
      smallest = std::min<std::size_t>(smallest, std::count_if(pool.begin(), pool.end(), [&](const auto& p) {
                                         return p.defect_class == c;
                                       }));
    }
    if (smallest == 0) continue;
    const auto n = 1 + uniform_index(rng, smallest);
    const auto items = select_top_n(pool, centroids, {static_cast<int>(n)});
    ASSERT_EQ(items.size(), 2 * n);
    for (const auto& c : centroids) {
      EXPECT_EQ(ids_of(items, c.defect_class), oracle_select(pool, c, n));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      EXPECT_EQ(items[i].rank, std::optional<int>(static_cast<int>(i % n) + 1));
      EXPECT_EQ(items[i].source, Source::kSynthetic);
    }
  }
}

TEST(SelectTopN, PropertyOrderInvariantAndPrefixMonotone) {
  Rng rng(5);
  const auto centroids = lattice_centroids(2);
  for (int trial = 0; trial < 40; ++trial) {
    auto pool = lattice_pool(rng, 120, 2);
    const auto base = select_top_n(pool, centroids, {20});
    shuffle(std::span<SelectionCandidate>(pool), rng);
    const auto shuffled = select_top_n(pool, centroids, {20});
    for (auto c : kAllClasses) EXPECT_EQ(ids_of(base, c), ids_of(shuffled, c));
    const auto small = select_top_n(pool, centroids, {7});
    for (auto c : kAllClasses) {
      const auto a = ids_of(small, c);
      const auto b = ids_of(base, c);
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST(SelectTopN, WholePoolAndOversizedRequests) {
  Rng rng(1);
  const auto centroids = lattice_centroids(2);
  std::vector<SelectionCandidate> pool;
  for (int i = 0; i < 6; ++i) {
    pool.push_back({"s" + std::to_string(i), DefectClass::kShell, "", {static_cast<float>(i), 0}});
    pool.push_back({"g" + std::to_string(i), DefectClass::kGlaze, "", {static_cast<float>(i), 0}});
  }
  EXPECT_EQ(select_top_n(pool, centroids, {6}).size(), 12u);
  EXPECT_THROW(select_top_n(pool, centroids, {7}), ConfigError);
  EXPECT_THROW(select_top_n(pool, centroids, {0}), ConfigError);
}

TEST(SelectTopN, FullScalePoolGivesThreeHundredTwelveRows) {
  Rng rng(3);
  std::vector<SelectionCandidate> pool;
  for (int i = 0; i < 832; ++i) {
    pool.push_back({"c" + std::to_string(i), i < 416 ? DefectClass::kShell : DefectClass::kGlaze, "",
                    {static_cast<float>(normal01(rng)), static_cast<float>(normal01(rng))}});
  }
  EXPECT_EQ(select_top_n(pool, lattice_centroids(2), {156}).size(), 312u);
}

// ---------------------------------------------------------------- diversity

std::vector<float> gaussian(Rng& rng, int dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(normal01(rng));
  return v;
}

TEST(Diversity, IdenticalToReferenceIsZero) {
  Rng rng(2);
  std::vector<std::vector<float>> real;
  for (int i = 0; i < 30; ++i) real.push_back(gaussian(rng, 8));
  std::vector<DiversityItem> syn;
  for (int i = 0; i < 30; ++i) syn.push_back({real[i], {real[i], real[(i + 1) % 30]}});
  EXPECT_NEAR(diversity_ratio(syn, real, 0).ratio, 0.0, 1e-9);
}

TEST(Diversity, SameDistributionIsAboutOne) {
  Rng rng(8);
  std::vector<std::vector<float>> real;
  for (int i = 0; i < 600; ++i) real.push_back(gaussian(rng, 16));
  std::vector<DiversityItem> syn;
  for (int i = 0; i < 600; ++i) syn.push_back({gaussian(rng, 16), {real[uniform_index(rng, real.size())]}});
  const auto r = diversity_ratio(syn, real, 1);
  EXPECT_NEAR(r.ratio, 1.0, 0.1);
  EXPECT_EQ(r.n_real_pairs, kSampledPairs);
}

TEST(Diversity, SingleReferenceIsPlainDistanceAndAllPairsBelowLimit) {
  std::vector<std::vector<float>> real{{0, 0}, {3, 4}, {6, 8}};
  std::vector<DiversityItem> syn{{{1, 0}, {{0, 0}}}};
  const auto r = diversity_ratio(syn, real, 0);
  EXPECT_EQ(r.n_real_pairs, 3u);
  EXPECT_DOUBLE_EQ(r.d_syn_to_ref, 1.0);
  EXPECT_DOUBLE_EQ(r.d_real_pair, (5.0 + 10.0 + 5.0) / 3.0);
  // The closer of two references counts.
  std::vector<DiversityItem> two{{{1, 0}, {{5, 0}, {0, 0}}}};
  EXPECT_DOUBLE_EQ(diversity_ratio(two, real, 0).d_syn_to_ref, 1.0);
}

TEST(Diversity, DegenerateInputsAreErrors) {
  std::vector<std::vector<float>> same{{1, 1}, {1, 1}};
  std::vector<DiversityItem> syn{{{0, 0}, {{1, 1}}}};
  EXPECT_THROW(diversity_ratio(syn, same, 0), DataError);
  EXPECT_THROW(diversity_ratio({}, same, 0), DataError);
  std::vector<DiversityItem> no_ref{{{0, 0}, {}}};
  std::vector<std::vector<float>> real{{0, 0}, {1, 1}};
  EXPECT_THROW(diversity_ratio(no_ref, real, 0), DataError);
}

TEST(Diversity, SampledPairsAreSeeded) {
  Rng rng(4);
  std::vector<std::vector<float>> real;
  for (int i = 0; i < 150; ++i) real.push_back(gaussian(rng, 4));
  std::vector<DiversityItem> syn{{gaussian(rng, 4), {real[0]}}};
  EXPECT_EQ(diversity_ratio(syn, real, 9).d_real_pair, diversity_ratio(syn, real, 9).d_real_pair);
  EXPECT_NE(diversity_ratio(syn, real, 9).d_real_pair, diversity_ratio(syn, real, 10).d_real_pair);
}

}  // namespace
