#pragma once

// Training and evaluation of the two-logit defect classifier, plus the
// baselines: fraction sweeps with and without RandAugment, zero-shot
// vision-language scoring and frozen-feature linear probes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "synthaug/classifier/metrics.hpp"
#include "synthaug/classifier/model.hpp"
#include "synthaug/classifier/transforms.hpp"
#include "synthaug/dataset/curation.hpp"
#include "synthaug/embedding/backend.hpp"
#include "synthaug/manifest.hpp"
#include "synthaug/reporting/report.hpp"

namespace synthaug::classifier {

using ::synthaug::to_json;

inline constexpr std::array<std::uint64_t, 3> kDefaultSeeds{0, 1, 2};

struct TrainConfig {
  // "grid-stats" (built-in frozen features) or "onnx:<path>" (frozen exported
  // backbone). Only the head is trained in both cases.
  std::string backbone = "grid-stats";
  int input_size = 224;
  // Hidden width of the head; 0 gives a linear head.
  int hidden = 64;
  AdamWConfig optimizer;
  int batch_size = 128;
  int epochs = 20;
  std::string loss = "bce";
  std::string lr_schedule = "constant";
  double crop_expansion_max = 0.3;
  double zoom_out_max = 1.3;
  double hflip_prob = 0.5;
  bool flip_synthetic = true;
  bool randaugment = false;
  int randaugment_ops = 2;
  int randaugment_magnitude = 9;
  std::uint64_t seed = 0;

  // Throws ConfigError for out-of-range values.
  void validate() const;
  AugmentParams augment_params() const;
};

json to_json(const TrainConfig& c);
// Strict: unknown keys are rejected.
TrainConfig train_config_from_json(const json& j);

std::unique_ptr<embedding::EmbeddingBackend> make_backbone(const TrainConfig& c);

// Decoded images keyed by path. Relative refs resolve against base_dir. Real
// training items keep only the region of their source a crop expansion can
// reach.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path base_dir = {}) : base_dir_(std::move(base_dir)) {}

  std::filesystem::path resolve(const std::string& ref) const;
  const cv::Mat& image(const std::string& ref);

  struct Region {
    cv::Mat pixels;
    Box crop;  // the tight crop, in region coordinates
  };
  const Region& real_region(const ManifestItem& item, double crop_expansion_max);

 private:
  std::filesystem::path base_dir_;
  std::map<std::string, cv::Mat> images_;
  std::map<std::string, Region> regions_;
};

struct MixedDataset {
  std::vector<ManifestItem> items;
  std::size_t n_real = 0;
  std::size_t n_synthetic = 0;

  std::set<std::string> group_ids() const;
};

// Real items get the real_train policy, synthetic ones synthetic_train.
// Throws ManifestError when an image_ref or image_id appears twice, or a label
// is not one-hot.
MixedDataset build_training_set(const TrainingManifest& real, const TrainingManifest* synthetic);

// Eval-policy items for a split.
std::vector<ManifestItem> eval_items(std::span<const dataset::ImageRecord> records);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct Checkpoint {
  std::string backbone_descriptor;
  int input_size = 0;
  Standardizer standardizer;
  Head head;
  int epoch = 0;
  double val_f1 = 0.0;
  std::set<std::string> train_group_ids;
  json config;
};

json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

// Trains for config.epochs and returns the epoch with the best validation
// micro-F1 (earliest on ties). Throws DataError when a class has no training
// item and LeakageError when val shares a group with the training set.
TrainResult train(const TrainConfig& config, const MixedDataset& dataset, std::span<const ManifestItem> val,
                  ImageStore& store, const embedding::EmbeddingBackend& backbone);

struct EvalEntry {
  Prf prf;
  MicroCounts counts;
  std::size_t n_items = 0;
};

json to_json(const EvalEntry& e);

// Throws LeakageError when the split shares a group with the checkpoint's
// training set and DataError for an unlabeled item.
EvalEntry evaluate(const Checkpoint& checkpoint, std::span<const ManifestItem> split, ImageStore& store,
                   const embedding::EmbeddingBackend& backbone);

struct SeedResult {
  std::uint64_t seed = 0;
  EvalEntry test;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  std::vector<EpochRecord> history;
};

struct EvalReport {
  std::string label;
  json config;
  std::string config_fingerprint;
  std::string split_id;
  std::size_t n_train_real = 0;
  std::size_t n_train_synthetic = 0;
  std::vector<SeedResult> seeds;
  reporting::Aggregate precision;
  reporting::Aggregate recall;
  reporting::Aggregate f1;
  json notes = json::object();
};

json to_json(const EvalReport& r);

// Hex digest over the sorted val and test group ids.
std::string split_identifier(std::span<const ManifestItem> val, std::span<const ManifestItem> test);

// Train + evaluate once per seed (config.seed is overridden).
EvalReport run_seeds(const std::string& label, const TrainConfig& config, const MixedDataset& dataset,
                     std::span<const ManifestItem> val, std::span<const ManifestItem> test,
                     std::span<const std::uint64_t> seeds, ImageStore& store,
                     const embedding::EmbeddingBackend& backbone,
                     const std::filesystem::path& checkpoint_dir = {});

struct SweepRow {
  double fraction = 0.0;
  std::size_t images = 0;
  EvalReport baseline;
  std::optional<EvalReport> randaugment;

  double delta() const;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

inline constexpr std::array<std::string_view, 5> kSweepColumns{"Fraction", "Images", "Baseline F1",
                                                                "RandAugment F1", "Δ"};

// One baseline and one RandAugment report per plan fraction. Throws
// MissingArtifactError when a fraction has no training images.
SweepTable fraction_sweep(const dataset::FractionPlan& plan, std::span<const dataset::ImageRecord> train_records,
                          std::span<const ManifestItem> val, std::span<const ManifestItem> test,
                          const TrainConfig& config, std::span<const std::uint64_t> seeds, ImageStore& store,
                          const embedding::EmbeddingBackend& backbone, bool with_randaugment = true);

std::string sweep_csv(const SweepTable& t);
std::string format_fraction(double f);

// Image-text similarity scorer.
class VisionLanguageBackend {
 public:
  virtual ~VisionLanguageBackend() = default;
  virtual std::string name() const = 0;
  // Empty when usable; otherwise why not.
  virtual std::string unavailable_reason() const = 0;
  virtual std::vector<double> similarities(const cv::Mat& image, std::span<const std::string> texts) const = 0;
};

// Deterministic offline scorer: cosine between a hash-projection image
// embedding and a seeded pseudo-embedding of each text.
class MockVisionLanguageBackend final : public VisionLanguageBackend {
 public:
  explicit MockVisionLanguageBackend(std::uint64_t seed = 0);
  std::string name() const override { return "mock-vl"; }
  std::string unavailable_reason() const override { return {}; }
  std::vector<double> similarities(const cv::Mat& image, std::span<const std::string> texts) const override;

 private:
  embedding::HashProjectionBackend image_backend_;
  std::uint64_t seed_;
};

// Exported image encoder plus precomputed text embeddings (JSON object
// mapping prompt text to a vector). Cosine similarity.
class OnnxVisionLanguageBackend final : public VisionLanguageBackend {
 public:
  OnnxVisionLanguageBackend(std::filesystem::path image_model, std::filesystem::path text_embeddings,
                            int input_size = 224);
  std::string name() const override { return "onnx-vl"; }
  std::string unavailable_reason() const override { return reason_; }
  std::vector<double> similarities(const cv::Mat& image, std::span<const std::string> texts) const override;

 private:
  std::unique_ptr<embedding::OnnxEmbeddingBackend> image_;
  std::map<std::string, std::vector<float>> text_;
  std::string reason_;
};

class UnavailableVisionLanguageBackend final : public VisionLanguageBackend {
 public:
  explicit UnavailableVisionLanguageBackend(std::string reason) : reason_(std::move(reason)) {}
  std::string name() const override { return "unavailable"; }
  std::string unavailable_reason() const override { return reason_; }
  std::vector<double> similarities(const cv::Mat&, std::span<const std::string>) const override { return {}; }

 private:
  std::string reason_;
};

inline const std::array<std::string, 2> kDefaultClassPrompts{
    "a photo of a ceramic insulator with shell damage", "a photo of a ceramic insulator with glaze damage"};

// Index of the higher score; ties go to shell (index 0).
DefectClass zero_shot_argmax(double shell_score, double glaze_score);

struct ZeroShotResult {
  std::string backend;
  bool skipped = false;
  std::string annotation;
  EvalEntry entry;
};

json to_json(const ZeroShotResult& r);

ZeroShotResult zero_shot_vl_eval(const VisionLanguageBackend& backend,
                                 const std::array<std::string, 2>& class_prompts,
                                 std::span<const ManifestItem> test, ImageStore& store);

// Linear head on frozen embeddings of eval-transformed images, trained for
// config.epochs with the same loss and optimizer; the final epoch is used.
// Throws DataError when the training items cover a single class.
EvalEntry linear_probe(const embedding::EmbeddingBackend& frozen, std::span<const ManifestItem> train_items,
                       std::span<const ManifestItem> test, const TrainConfig& config, ImageStore& store);

}  // namespace synthaug::classifier
