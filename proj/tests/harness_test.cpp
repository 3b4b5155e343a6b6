#include <gtest/gtest.h>

#include "support.hpp"
#include "synthaug/classifier/harness.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::classifier;
using synthaug::testing::TempDir;
using synthaug::testing::write_record_images;

ManifestItem item(const std::string& id, DefectClass c, Source s = Source::kReal) {
  ManifestItem m;
  m.image_id = id;
  m.image_ref = id + ".png";
  m.group_id = s == Source::kReal ? "g-" + id : "";
  m.label_vector = one_hot(c);
  m.source = s;
  return m;
}

TEST(BuildTrainingSet, CountsAndPolicies) {
  TrainingManifest real, syn;
  for (int i = 0; i < 104; ++i) real.items.push_back(item("r" + std::to_string(i), kAllClasses[i % 2]));
  for (int i = 0; i < 312; ++i) syn.items.push_back(item("s" + std::to_string(i), kAllClasses[i % 2], Source::kSynthetic));
  const auto ds = build_training_set(real, &syn);
  EXPECT_EQ(ds.items.size(), 416u);
  EXPECT_EQ(ds.n_real, 104u);
  EXPECT_EQ(ds.n_synthetic, 312u);
  EXPECT_EQ(ds.items.front().transform_policy, kPolicyRealTrain);
  EXPECT_EQ(ds.items.back().transform_policy, kPolicySyntheticTrain);
  EXPECT_EQ(ds.items.back().source, Source::kSynthetic);
  EXPECT_EQ(build_training_set(real, nullptr).n_synthetic, 0u);
}

TEST(BuildTrainingSet, RejectsDuplicatesAndBadLabels) {
  TrainingManifest real;
  real.items = {item("a", DefectClass::kShell), item("b", DefectClass::kGlaze)};
  TrainingManifest syn;
  syn.items = {item("a", DefectClass::kShell, Source::kSynthetic)};
  EXPECT_THROW(build_training_set(real, &syn), ManifestError);

  syn.items[0].image_ref = "other.png";
  EXPECT_THROW(build_training_set(real, &syn), ManifestError);  // same image_id

  TrainingManifest bad;
  bad.items = {item("x", DefectClass::kShell)};
  bad.items[0].label_vector = {1, 1};
  EXPECT_THROW(build_training_set(bad, nullptr), ManifestError);
  bad.items[0].label_vector = {0, 0};
  EXPECT_THROW(build_training_set(bad, nullptr), ManifestError);
}

TEST(TrainConfig, StrictJsonRoundTripAndValidation) {
  TrainConfig c;
  c.hidden = 8;
  c.optimizer.lr = 0.01;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  auto j = to_json(c);
  j["learning_rate"] = 0.1;
  EXPECT_THROW(train_config_from_json(j), ConfigError);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// Small on-disk corpus: train, val and test groups with distinct prefixes.
class HarnessFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    train_records = write_record_images(dir.path() / "train", 12, 2, 1, "tr");
    val = eval_items(write_record_images(dir.path() / "val", 4, 2, 2, "va"));
    test = eval_items(write_record_images(dir.path() / "test", 6, 2, 3, "te"));
    real = manifest_from_records(train_records, kPolicyRealTrain);
    config.input_size = 32;
    config.hidden = 8;
    config.epochs = 2;
    config.batch_size = 8;
    config.optimizer.lr = 0.01;
    backbone = make_backbone(config);
  }

  TempDir dir;
  std::vector<dataset::ImageRecord> train_records;
  std::vector<ManifestItem> val;
  std::vector<ManifestItem> test;
  TrainingManifest real;
  TrainConfig config;
  std::unique_ptr<embedding::EmbeddingBackend> backbone;
  ImageStore store;
};

TEST_F(HarnessFixture, SmokeRunRecordsHistoryAndEvaluates) {
  const auto ds = build_training_set(real, nullptr);
  const auto r = train(config, ds, val, store, *backbone);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_GE(r.checkpoint.epoch, 1);
  EXPECT_LE(r.checkpoint.epoch, 2);
  EXPECT_EQ(r.checkpoint.train_group_ids.size(), 12u);
  const auto e = evaluate(r.checkpoint, test, store, *backbone);
  EXPECT_EQ(e.n_items, test.size());
  EXPECT_EQ(e.counts.tp + e.counts.fn, static_cast<std::int64_t>(test.size()));
}

TEST_F(HarnessFixture, SameSeedSameCheckpoint) {
  const auto ds = build_training_set(real, nullptr);
  const auto a = train(config, ds, val, store, *backbone);
  ImageStore fresh;
  const auto b = train(config, ds, val, fresh, *backbone);
  EXPECT_EQ(to_json(a.checkpoint), to_json(b.checkpoint));
  config.seed = 1;
  const auto c = train(config, ds, val, store, *backbone);
  EXPECT_NE(to_json(a.checkpoint).at("head"), to_json(c.checkpoint).at("head"));
}

TEST_F(HarnessFixture, LearnsSeparableClasses) {
  config.epochs = 20;
  const auto ds = build_training_set(real, nullptr);
  const auto r = train(config, ds, val, store, *backbone);
  EXPECT_GE(evaluate(r.checkpoint, test, store, *backbone).prf.f1, 0.9);
}

TEST_F(HarnessFixture, SharedGroupsAreLeakage) {
  const auto ds = build_training_set(real, nullptr);
  const auto leaky_val = eval_items(std::span(train_records).first(2));
  EXPECT_THROW(train(config, ds, leaky_val, store, *backbone), LeakageError);
  const auto r = train(config, ds, val, store, *backbone);
  EXPECT_THROW(evaluate(r.checkpoint, leaky_val, store, *backbone), LeakageError);
}

TEST_F(HarnessFixture, SingleClassTrainingIsAnError) {
  TrainingManifest shell_only;
  for (const auto& it : real.items) {
    if (it.defect_class() == DefectClass::kShell) shell_only.items.push_back(it);
  }
  EXPECT_THROW(train(config, build_training_set(shell_only, nullptr), val, store, *backbone), DataError);
}

TEST_F(HarnessFixture, SyntheticItemsJoinTraining) {
  TrainingManifest syn;
  for (int i = 0; i < 6; ++i) {
    const auto c = kAllClasses[i % 2];
    auto img = synthaug::testing::noise_image(32, 32, 100 + i);
    img.setTo(c == DefectClass::kShell ? cv::Scalar(40, 40, 220) : cv::Scalar(220, 40, 40));
    const auto path = dir.path() / ("syn" + std::to_string(i) + ".png");
    save_png(path, img);
    ManifestItem m = item("syn" + std::to_string(i), c, Source::kSynthetic);
    m.image_ref = path.string();
    syn.items.push_back(m);
  }
  const auto ds = build_training_set(real, &syn);
  const auto r = train(config, ds, val, store, *backbone);
  // Synthetic items carry no group, so only real groups are recorded.
  EXPECT_EQ(r.checkpoint.train_group_ids.size(), 12u);
}

TEST_F(HarnessFixture, CheckpointRoundTrip) {
  const auto r = train(config, build_training_set(real, nullptr), val, store, *backbone);
  save_checkpoint(dir / "ckpt.json", r.checkpoint);
  const auto back = load_checkpoint(dir / "ckpt.json");
  EXPECT_EQ(to_json(back), to_json(r.checkpoint));
  const auto a = evaluate(r.checkpoint, test, store, *backbone);
  const auto b = evaluate(back, test, store, *backbone);
  EXPECT_EQ(a.counts.tp, b.counts.tp);
  EXPECT_EQ(a.counts.fp, b.counts.fp);
}

TEST_F(HarnessFixture, RunSeedsAggregatesEverySeed) {
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const auto ds = build_training_set(real, nullptr);
  const auto rep = run_seeds("baseline", config, ds, val, test, seeds, store, *backbone, dir / "ckpts");
  ASSERT_EQ(rep.seeds.size(), 3u);
  EXPECT_EQ(rep.f1.values.size(), 3u);
  EXPECT_EQ(rep.n_train_real, ds.n_real);
  EXPECT_EQ(rep.split_id, split_identifier(val, test));
  EXPECT_NE(rep.split_id, split_identifier(test, val));
}

TEST_F(HarnessFixture, SweepHasExactColumnsAndNestedRows) {
  std::vector<std::string> groups;
  for (const auto& r : train_records) {
    if (groups.empty() || groups.back() != r.group_id) groups.push_back(r.group_id);
  }
  const std::vector<double> fractions{0.5, 1.0};
  const auto plan = dataset::fraction_subsets(groups, fractions, 3);
  const std::vector<std::uint64_t> seeds{0};
  const auto table = fraction_sweep(plan, train_records, val, test, config, seeds, store, *backbone);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].images, 12u);
  EXPECT_EQ(table.rows[1].images, 24u);
  ASSERT_TRUE(table.rows[1].randaugment.has_value());
  const auto csv = sweep_csv(table);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "Fraction,Images,Baseline F1,RandAugment F1,Δ");
  EXPECT_NE(csv.find("\n50%,12,"), std::string::npos);
  EXPECT_NE(csv.find("\n100%,24,"), std::string::npos);

  dataset::FractionPlan empty = plan;
  empty.group_sets[0] = {"nope"};
  EXPECT_THROW(fraction_sweep(empty, train_records, val, test, config, seeds, store, *backbone),
               MissingArtifactError);
}

TEST(FormatFraction, WholeAndHalfPercents) {
  EXPECT_EQ(format_fraction(0.1), "10%");
  EXPECT_EQ(format_fraction(1.0), "100%");
  EXPECT_EQ(format_fraction(0.125), "12.5%");
}

TEST(ZeroShot, ArgmaxTiesGoToShell) {
  EXPECT_EQ(zero_shot_argmax(0.31, 0.29), DefectClass::kShell);
  EXPECT_EQ(zero_shot_argmax(0.29, 0.31), DefectClass::kGlaze);
  EXPECT_EQ(zero_shot_argmax(0.3, 0.3), DefectClass::kShell);
}

TEST_F(HarnessFixture, ZeroShotSkipsUnavailableBackend) {
  const UnavailableVisionLanguageBackend none("no image-text model configured");
  const auto r = zero_shot_vl_eval(none, kDefaultClassPrompts, test, store);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.annotation, "skipped: no image-text model configured");

  const MockVisionLanguageBackend mock(0);
  const auto m = zero_shot_vl_eval(mock, kDefaultClassPrompts, test, store);
  EXPECT_FALSE(m.skipped);
  EXPECT_EQ(m.entry.n_items, test.size());
  EXPECT_EQ(m.entry.counts.tp + m.entry.counts.fn, static_cast<std::int64_t>(test.size()));
}

TEST_F(HarnessFixture, LinearProbe) {
  config.epochs = 100;
  const auto train_items = real.items;
  const auto e = linear_probe(*backbone, train_items, test, config, store);
  EXPECT_DOUBLE_EQ(e.prf.f1, 1.0);

  std::vector<ManifestItem> one_class;
  for (const auto& it : train_items) {
    if (it.defect_class() == DefectClass::kGlaze) one_class.push_back(it);
  }
  EXPECT_THROW(linear_probe(*backbone, one_class, test, config, store), DataError);
}

}  // namespace
