#include "synthaug/classifier/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "synthaug/classifier/features.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"

namespace synthaug::classifier {

namespace {

constexpr int kEmbedChunk = 64;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Matrix embed_all(const embedding::EmbeddingBackend& backbone, const std::vector<cv::Mat>& images) {
  Matrix out(backbone.dimension(), static_cast<Eigen::Index>(images.size()));
  for (std::size_t start = 0; start < images.size(); start += kEmbedChunk) {
    const std::size_t end = std::min(images.size(), start + kEmbedChunk);
    const auto vecs = backbone.embed_batch(std::span<const cv::Mat>(images.data() + start, end - start));
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (static_cast<int>(vecs[i].size()) != backbone.dimension()) throw BackendError("backbone dimension mismatch");
      for (int d = 0; d < backbone.dimension(); ++d) {
        out(d, static_cast<Eigen::Index>(start + i)) = vecs[i][static_cast<std::size_t>(d)];
      }
    }
  }
  return out;
}

Matrix label_matrix(std::span<const ManifestItem> items) {
  Matrix y(2, static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& lv = items[i].label_vector;
    if (lv[0] + lv[1] == 0) throw DataError("unlabeled item '" + items[i].image_id + "'");
    y(0, static_cast<Eigen::Index>(i)) = lv[0];
    y(1, static_cast<Eigen::Index>(i)) = lv[1];
  }
  return y;
}

// Natural (unaugmented) view of an item.
cv::Mat eval_view(const ManifestItem& item, int input_size, ImageStore& store, double crop_expansion_max) {
  if (item.transform_policy == kPolicyRealTrain) {
    const auto& region = store.real_region(item, crop_expansion_max);
    return transform_eval(crop(region.pixels, region.crop), input_size);
  }
  return transform_eval(store.image(item.image_ref), input_size);
}

cv::Mat train_view(const ManifestItem& item, const AugmentParams& p, ImageStore& store, Rng& rng) {
  if (item.transform_policy == kPolicyRealTrain) {
    const auto& region = store.real_region(item, p.crop_expansion_max);
    return transform_real_train(region.pixels, region.crop, p, rng);
  }
  if (item.transform_policy == kPolicySyntheticTrain) {
    return transform_synthetic_train(store.image(item.image_ref), p, rng);
  }
  return transform_eval(store.image(item.image_ref), p.input_size);
}

std::set<std::string> groups_of(std::span<const ManifestItem> items) {
  std::set<std::string> out;
  for (const auto& it : items) {
    if (!it.group_id.empty()) out.insert(it.group_id);
  }
  return out;
}

void check_disjoint(const std::set<std::string>& train_groups, std::span<const ManifestItem> split,
                    std::string_view what) {
  for (const auto& it : split) {
    if (!it.group_id.empty() && train_groups.contains(it.group_id)) {
      throw LeakageError(std::string(what) + " item '" + it.image_id + "' shares group '" + it.group_id +
                         "' with the training set");
    }
  }
}

void check_both_classes(std::span<const ManifestItem> items, std::string_view what) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& it : items) {
    for (std::size_t k = 0; k < kNumClasses; ++k) counts[k] += static_cast<std::size_t>(it.label_vector[k]);
  }
  for (auto cls : kAllClasses) {
    if (counts[class_index(cls)] == 0) {
      throw DataError(std::string(what) + " has no '" + std::string(to_string(cls)) + "' items");
    }
  }
}

EvalEntry score(const Matrix& logits, std::span<const ManifestItem> items) {
  std::vector<LabelVector> truth;
  std::vector<LabelVector> pred;
  truth.reserve(items.size());
  pred.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& lv = items[i].label_vector;
    if (lv[0] + lv[1] == 0) throw DataError("unlabeled item '" + items[i].image_id + "'");
    truth.push_back(lv);
    const auto col = static_cast<Eigen::Index>(i);
    // sigmoid(z) >= 0.5 exactly when z >= 0
    pred.push_back(LabelVector{logits(0, col) >= 0.0 ? 1 : 0, logits(1, col) >= 0.0 ? 1 : 0});
  }
  EvalEntry e;
  e.counts = micro_counts(truth, pred);
  e.prf = prf_from_counts(e.counts);
  e.n_items = items.size();
  return e;
}

void fit_epoch(Head& head, const Matrix& x, const Matrix& y, int batch_size, const AdamWConfig& opt,
               Rng& order_rng, double* mean_loss) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  shuffle(std::span<Eigen::Index>(order), order_rng);
  double loss_sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const auto b = static_cast<Eigen::Index>(end - start);
    Matrix xb(x.rows(), b);
    Matrix yb(2, b);
    for (Eigen::Index k = 0; k < b; ++k) {
      xb.col(k) = x.col(order[start + static_cast<std::size_t>(k)]);
      yb.col(k) = y.col(order[start + static_cast<std::size_t>(k)]);
    }
    loss_sum += head.train_step(xb, yb, opt) * static_cast<double>(b);
    seen += static_cast<std::size_t>(b);
  }
  if (mean_loss) *mean_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (input_size < 8) throw ConfigError("train.input_size must be >= 8");
  if (hidden < 0) throw ConfigError("train.hidden must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (optimizer.weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (loss != "bce") throw ConfigError("train.loss must be 'bce'");
  if (lr_schedule != "constant") throw ConfigError("train.lr_schedule must be 'constant'");
  if (crop_expansion_max < 0.0 || zoom_out_max < 1.0) throw ConfigError("invalid augmentation magnitudes");
  if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ConfigError("train.hflip_prob must be in [0, 1]");
  if (randaugment_ops < 0 || randaugment_magnitude < 0 || randaugment_magnitude > 30) {
    throw ConfigError("RandAugment needs ops >= 0 and magnitude in [0, 30]");
  }
  if (backbone != "grid-stats" && !backbone.starts_with("onnx:")) {
    throw ConfigError("train.backbone must be 'grid-stats' or 'onnx:<path>'");
  }
}

AugmentParams TrainConfig::augment_params() const {
  AugmentParams p;
  p.input_size = input_size;
  p.crop_expansion_max = crop_expansion_max;
  p.zoom_out_max = zoom_out_max;
  p.hflip_prob = hflip_prob;
  p.flip_synthetic = flip_synthetic;
  p.randaugment = randaugment;
  p.randaugment_ops = randaugment_ops;
  p.randaugment_magnitude = randaugment_magnitude;
  return p;
}

json to_json(const TrainConfig& c) {
  return {{"backbone", c.backbone},
          {"input_size", c.input_size},
          {"hidden", c.hidden},
          {"lr", c.optimizer.lr},
          {"weight_decay", c.optimizer.weight_decay},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"loss", c.loss},
          {"lr_schedule", c.lr_schedule},
          {"crop_expansion_max", c.crop_expansion_max},
          {"zoom_out_max", c.zoom_out_max},
          {"hflip_prob", c.hflip_prob},
          {"flip_synthetic", c.flip_synthetic},
          {"randaugment", c.randaugment},
          {"randaugment_ops", c.randaugment_ops},
          {"randaugment_magnitude", c.randaugment_magnitude},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"backbone", "input_size", "hidden", "lr", "weight_decay", "beta1", "beta2", "eps",
                       "batch_size", "epochs", "loss", "lr_schedule", "crop_expansion_max", "zoom_out_max",
                       "hflip_prob", "flip_synthetic", "randaugment", "randaugment_ops", "randaugment_magnitude",
                       "seed"},
                      "train");
  TrainConfig c;
  try {
    c.backbone = j.value("backbone", c.backbone);
    c.input_size = j.value("input_size", c.input_size);
    c.hidden = j.value("hidden", c.hidden);
    c.optimizer.lr = j.value("lr", c.optimizer.lr);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = j.value("eps", c.optimizer.eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.loss = j.value("loss", c.loss);
    c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
    c.crop_expansion_max = j.value("crop_expansion_max", c.crop_expansion_max);
    c.zoom_out_max = j.value("zoom_out_max", c.zoom_out_max);
    c.hflip_prob = j.value("hflip_prob", c.hflip_prob);
    c.flip_synthetic = j.value("flip_synthetic", c.flip_synthetic);
    c.randaugment = j.value("randaugment", c.randaugment);
    c.randaugment_ops = j.value("randaugment_ops", c.randaugment_ops);
    c.randaugment_magnitude = j.value("randaugment_magnitude", c.randaugment_magnitude);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

std::unique_ptr<embedding::EmbeddingBackend> make_backbone(const TrainConfig& c) {
  if (c.backbone == "grid-stats") return std::make_unique<GridStatsBackend>(c.input_size);
  if (c.backbone.starts_with("onnx:")) {
    return std::make_unique<embedding::OnnxEmbeddingBackend>(c.backbone.substr(5), c.input_size);
  }
  throw ConfigError("unknown backbone '" + c.backbone + "'");
}

std::filesystem::path ImageStore::resolve(const std::string& ref) const {
  const std::filesystem::path p(ref);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

const cv::Mat& ImageStore::image(const std::string& ref) {
  auto it = images_.find(ref);
  if (it == images_.end()) it = images_.emplace(ref, load_image(resolve(ref))).first;
  return it->second;
}

const ImageStore::Region& ImageStore::real_region(const ManifestItem& item, double crop_expansion_max) {
  const std::string key = item.image_id + "|" + item.source_path;
  auto it = regions_.find(key);
  if (it != regions_.end()) return it->second;
  Region r;
  if (item.source_path.empty() || !item.crop_box) {
    r.pixels = image(item.image_ref);
    r.crop = Box{0, 0, r.pixels.cols, r.pixels.rows};
  } else {
    const cv::Mat source = load_image(resolve(item.source_path));
    const Box env = expansion_envelope(*item.crop_box, source.cols, source.rows, crop_expansion_max);
    r.pixels = crop(source, env);
    r.crop = Box{item.crop_box->x_min - env.x_min, item.crop_box->y_min - env.y_min,
                 item.crop_box->x_max - env.x_min, item.crop_box->y_max - env.y_min};
  }
  return regions_.emplace(key, std::move(r)).first->second;
}

std::set<std::string> MixedDataset::group_ids() const { return groups_of(items); }

MixedDataset build_training_set(const TrainingManifest& real, const TrainingManifest* synthetic) {
  MixedDataset ds;
  std::set<std::string> refs;
  std::set<std::string> ids;
  auto add = [&](const ManifestItem& src, Source source) {
    ManifestItem item = src;
    try {
      (void)class_of(item.label_vector);
    } catch (const DataError& e) {
      throw ManifestError("item '" + item.image_id + "': " + e.what());
    }
    if (!refs.insert(item.image_ref).second) {
      throw ManifestError("image_ref '" + item.image_ref + "' appears in more than one manifest row");
    }
    if (!ids.insert(item.image_id).second) {
      throw ManifestError("image_id '" + item.image_id + "' appears in more than one manifest row");
    }
    item.source = source;
    item.transform_policy =
        std::string(source == Source::kReal ? kPolicyRealTrain : kPolicySyntheticTrain);
    ds.items.push_back(std::move(item));
  };
  for (const auto& it : real.items) add(it, Source::kReal);
  ds.n_real = ds.items.size();
  if (synthetic) {
    for (const auto& it : synthetic->items) add(it, Source::kSynthetic);
  }
  ds.n_synthetic = ds.items.size() - ds.n_real;
  return ds;
}

std::vector<ManifestItem> eval_items(std::span<const dataset::ImageRecord> records) {
  std::vector<ManifestItem> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(manifest_item_from_record(r, kPolicyEval));
  return out;
}

json to_json(const Checkpoint& c) {
  std::vector<double> mean(c.standardizer.mean.data(), c.standardizer.mean.data() + c.standardizer.mean.size());
  std::vector<double> scale(c.standardizer.scale.data(),
                            c.standardizer.scale.data() + c.standardizer.scale.size());
  return {{"format", "synthaug-head-v1"},
          {"backbone_descriptor", c.backbone_descriptor},
          {"input_size", c.input_size},
          {"feature_mean", mean},
          {"feature_scale", scale},
          {"head", c.head.to_json()},
          {"epoch", c.epoch},
          {"val_f1", c.val_f1},
          {"train_group_ids", c.train_group_ids},
          {"config", c.config}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != "synthaug-head-v1") throw DataError("unknown checkpoint format");
    c.backbone_descriptor = j.at("backbone_descriptor").get<std::string>();
    c.input_size = j.at("input_size").get<int>();
    const auto mean = j.at("feature_mean").get<std::vector<double>>();
    const auto scale = j.at("feature_scale").get<std::vector<double>>();
    c.standardizer.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    c.standardizer.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    c.head = Head::from_json(j.at("head"));
    c.epoch = j.at("epoch").get<int>();
    c.val_f1 = j.at("val_f1").get<double>();
    c.train_group_ids = j.at("train_group_ids").get<std::set<std::string>>();
    c.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { write_json_file(path, to_json(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("checkpoint not found: " + path.string());
  return checkpoint_from_json(read_json_file(path));
}

TrainResult train(const TrainConfig& config, const MixedDataset& dataset, std::span<const ManifestItem> val,
                  ImageStore& store, const embedding::EmbeddingBackend& backbone) {
  config.validate();
  if (dataset.items.empty()) throw DataError("empty training set");
  check_both_classes(dataset.items, "training set");
  if (val.empty()) throw DataError("validation split is empty");
  const auto train_groups = dataset.group_ids();
  check_disjoint(train_groups, val, "validation");

  const AugmentParams ap = config.augment_params();
  const auto n = dataset.items.size();

  std::vector<cv::Mat> views;
  views.reserve(n);
  for (const auto& it : dataset.items) views.push_back(eval_view(it, config.input_size, store, ap.crop_expansion_max));
  const Standardizer standardizer = Standardizer::fit(embed_all(backbone, views));

  views.clear();
  for (const auto& it : val) views.push_back(eval_view(it, config.input_size, store, ap.crop_expansion_max));
  const Matrix x_val = standardizer.apply(embed_all(backbone, views));

  const Matrix y_train = label_matrix(dataset.items);

  Rng init_rng(mix_seed(config.seed, "head_init"));
  Head head(backbone.dimension(), config.hidden, init_rng);

  TrainResult result;
  result.checkpoint.backbone_descriptor = backbone.descriptor();
  result.checkpoint.input_size = config.input_size;
  result.checkpoint.standardizer = standardizer;
  result.checkpoint.train_group_ids = train_groups;
  result.checkpoint.config = to_json(config);
  double best = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    views.clear();
    for (const auto& it : dataset.items) {
      Rng aug(mix_seed(config.seed, "aug/" + std::to_string(epoch) + "/" + it.image_id));
      views.push_back(train_view(it, ap, store, aug));
    }
    const Matrix x = standardizer.apply(embed_all(backbone, views));
    Rng order(mix_seed(config.seed, "order/" + std::to_string(epoch)));
    EpochRecord rec;
    rec.epoch = epoch;
    fit_epoch(head, x, y_train, config.batch_size, config.optimizer, order, &rec.train_loss);
    rec.val_f1 = score(head.logits(x_val), val).prf.f1;
    result.history.push_back(rec);
    if (rec.val_f1 > best) {
      best = rec.val_f1;
      result.checkpoint.head = head;
      result.checkpoint.epoch = epoch;
      result.checkpoint.val_f1 = rec.val_f1;
    }
  }
  return result;
}

json to_json(const EvalEntry& e) {
  return {{"precision", e.prf.precision}, {"recall", e.prf.recall}, {"f1", e.prf.f1},
          {"counts", to_json(e.counts)},  {"n_items", e.n_items},   {"threshold", kDecisionThreshold}};
}

EvalEntry evaluate(const Checkpoint& checkpoint, std::span<const ManifestItem> split, ImageStore& store,
                   const embedding::EmbeddingBackend& backbone) {
  check_disjoint(checkpoint.train_group_ids, split, "evaluation");
  if (backbone.descriptor() != checkpoint.backbone_descriptor) {
    throw ConfigError("checkpoint was trained on '" + checkpoint.backbone_descriptor + "', not '" +
                      backbone.descriptor() + "'");
  }
  std::vector<cv::Mat> views;
  views.reserve(split.size());
  for (const auto& it : split) views.push_back(transform_eval(store.image(it.image_ref), checkpoint.input_size));
  const Matrix x = checkpoint.standardizer.apply(embed_all(backbone, views));
  return score(checkpoint.head.logits(x), split);
}

json to_json(const EvalReport& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    json hist = json::array();
    for (const auto& h : s.history) {
      hist.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_f1", h.val_f1}});
    }
    seeds.push_back({{"seed", s.seed},
                     {"test", to_json(s.test)},
                     {"best_epoch", s.best_epoch},
                     {"best_val_f1", s.best_val_f1},
                     {"history", hist}});
  }
  return {{"label", r.label},
          {"config", r.config},
          {"config_fingerprint", r.config_fingerprint},
          {"split_id", r.split_id},
          {"n_train_real", r.n_train_real},
          {"n_train_synthetic", r.n_train_synthetic},
          {"seeds", seeds},
          {"precision", to_json(r.precision)},
          {"recall", to_json(r.recall)},
          {"f1", to_json(r.f1)},
          {"f1_display", reporting::format_mean_std(r.f1)},
          {"notes", r.notes}};
}

std::string split_identifier(std::span<const ManifestItem> val, std::span<const ManifestItem> test) {
  std::string buf = "val:";
  for (const auto& g : groups_of(val)) buf += g + ",";
  buf += "test:";
  for (const auto& g : groups_of(test)) buf += g + ",";
  return hex16(fnv1a64(buf));
}

EvalReport run_seeds(const std::string& label, const TrainConfig& config, const MixedDataset& dataset,
                     std::span<const ManifestItem> val, std::span<const ManifestItem> test,
                     std::span<const std::uint64_t> seeds, ImageStore& store,
                     const embedding::EmbeddingBackend& backbone, const std::filesystem::path& checkpoint_dir) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  EvalReport report;
  report.label = label;
  TrainConfig base = config;
  base.seed = 0;
  report.config = to_json(base);
  report.config.erase("seed");
  report.config["seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.end());
  report.config["backbone_descriptor"] = backbone.descriptor();
  std::vector<std::string> ids;
  for (const auto& it : dataset.items) ids.push_back(it.image_id);
  std::sort(ids.begin(), ids.end());
  std::string fp = report.config.dump();
  for (const auto& id : ids) fp += "|" + id;
  report.config_fingerprint = hex16(fnv1a64(fp));
  report.split_id = split_identifier(val, test);
  report.n_train_real = dataset.n_real;
  report.n_train_synthetic = dataset.n_synthetic;

  std::vector<double> p, r, f;
  for (auto seed : seeds) {
    TrainConfig c = config;
    c.seed = seed;
    auto trained = train(c, dataset, val, store, backbone);
    SeedResult s;
    s.seed = seed;
    s.test = evaluate(trained.checkpoint, test, store, backbone);
    s.best_epoch = trained.checkpoint.epoch;
    s.best_val_f1 = trained.checkpoint.val_f1;
    s.history = std::move(trained.history);
    if (!checkpoint_dir.empty()) {
      save_checkpoint(checkpoint_dir / (label + "_seed" + std::to_string(seed) + ".json"), trained.checkpoint);
    }
    p.push_back(s.test.prf.precision);
    r.push_back(s.test.prf.recall);
    f.push_back(s.test.prf.f1);
    report.seeds.push_back(std::move(s));
  }
  report.precision = reporting::aggregate_runs(p);
  report.recall = reporting::aggregate_runs(r);
  report.f1 = reporting::aggregate_runs(f);
  report.notes["metric"] = "micro P/R/F1 over both label decisions, threshold 0.5";
  report.notes["checkpoint_selection"] = "best validation micro-F1, earliest epoch on ties";
  return report;
}

double SweepRow::delta() const { return randaugment ? randaugment->f1.mean - baseline.f1.mean : 0.0; }

std::string format_fraction(double f) {
  const double pct = f * 100.0;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%.0f%%", pct);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  }
  return buf;
}

SweepTable fraction_sweep(const dataset::FractionPlan& plan, std::span<const dataset::ImageRecord> train_records,
                          std::span<const ManifestItem> val, std::span<const ManifestItem> test,
                          const TrainConfig& config, std::span<const std::uint64_t> seeds, ImageStore& store,
                          const embedding::EmbeddingBackend& backbone, bool with_randaugment) {
  if (plan.fractions.size() != plan.group_sets.size()) throw DataError("fraction plan is inconsistent");
  SweepTable table;
  for (std::size_t i = 0; i < plan.fractions.size(); ++i) {
    const double f = plan.fractions[i];
    const auto records = dataset::records_in_groups(train_records, plan.group_sets[i]);
    if (records.empty()) {
      throw MissingArtifactError("no training images for fraction " + format_fraction(f) +
                                 " (re-run `split` to regenerate fraction manifests)");
    }
    const auto real = manifest_from_records(records, kPolicyRealTrain);
    const auto ds = build_training_set(real, nullptr);
    SweepRow row;
    row.fraction = f;
    row.images = records.size();
    TrainConfig base = config;
    base.randaugment = false;
    row.baseline = run_seeds("baseline_" + format_fraction(f), base, ds, val, test, seeds, store, backbone);
    if (with_randaugment) {
      TrainConfig ra = config;
      ra.randaugment = true;
      row.randaugment = run_seeds("randaugment_" + format_fraction(f), ra, ds, val, test, seeds, store, backbone);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string sweep_csv(const SweepTable& t) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kSweepColumns.size(); ++i) out << (i ? "," : "") << kSweepColumns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    out << format_fraction(row.fraction) << ',' << row.images << ',' << reporting::format_mean_std(row.baseline.f1)
        << ',' << (row.randaugment ? reporting::format_mean_std(row.randaugment->f1) : "") << ','
        << (row.randaugment ? reporting::format_signed(row.delta()) : "") << '\n';
  }
  return out.str();
}

MockVisionLanguageBackend::MockVisionLanguageBackend(std::uint64_t seed) : image_backend_(64, seed), seed_(seed) {}

std::vector<double> MockVisionLanguageBackend::similarities(const cv::Mat& image,
                                                            std::span<const std::string> texts) const {
  const auto v = image_backend_.embed_batch(std::span<const cv::Mat>(&image, 1)).front();
  double vn = 0.0;
  for (float x : v) vn += static_cast<double>(x) * x;
  vn = std::sqrt(vn);
  std::vector<double> out;
  for (const auto& t : texts) {
    Rng rng(mix_seed(seed_, "text/" + t));
    double dot = 0.0, tn = 0.0;
    for (float x : v) {
      const double w = normal01(rng);
      dot += w * x;
      tn += w * w;
    }
    out.push_back(vn > 0.0 ? dot / (vn * std::sqrt(tn)) : 0.0);
  }
  return out;
}

OnnxVisionLanguageBackend::OnnxVisionLanguageBackend(std::filesystem::path image_model,
                                                     std::filesystem::path text_embeddings, int input_size) {
  try {
    image_ = std::make_unique<embedding::OnnxEmbeddingBackend>(image_model, input_size);
    const json j = read_json_file(text_embeddings);
    for (const auto& [text, vec] : j.items()) text_[text] = vec.get<std::vector<float>>();
  } catch (const std::exception& e) {
    image_.reset();
    reason_ = e.what();
  }
}

std::vector<double> OnnxVisionLanguageBackend::similarities(const cv::Mat& image,
                                                            std::span<const std::string> texts) const {
  if (!image_) throw BackendError("vision-language backend unavailable: " + reason_);
  const auto v = image_->embed_batch(std::span<const cv::Mat>(&image, 1)).front();
  std::vector<double> out;
  for (const auto& t : texts) {
    auto it = text_.find(t);
    if (it == text_.end()) throw BackendError("no text embedding for prompt '" + t + "'");
    if (it->second.size() != v.size()) throw BackendError("text embedding dimension mismatch");
    double dot = 0.0, a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      dot += static_cast<double>(v[i]) * it->second[i];
      a += static_cast<double>(v[i]) * v[i];
      b += static_cast<double>(it->second[i]) * it->second[i];
    }
    out.push_back(a > 0 && b > 0 ? dot / std::sqrt(a * b) : 0.0);
  }
  return out;
}

DefectClass zero_shot_argmax(double shell_score, double glaze_score) {
  return glaze_score > shell_score ? DefectClass::kGlaze : DefectClass::kShell;
}

json to_json(const ZeroShotResult& r) {
  json j{{"backend", r.backend}, {"skipped", r.skipped}};
  if (r.skipped) {
    j["annotation"] = r.annotation;
  } else {
    j["result"] = to_json(r.entry);
  }
  return j;
}

ZeroShotResult zero_shot_vl_eval(const VisionLanguageBackend& backend,
                                 const std::array<std::string, 2>& class_prompts,
                                 std::span<const ManifestItem> test, ImageStore& store) {
  ZeroShotResult res;
  res.backend = backend.name();
  const auto reason = backend.unavailable_reason();
  if (!reason.empty()) {
    res.skipped = true;
    res.annotation = "skipped: " + reason;
    return res;
  }
  std::vector<LabelVector> truth, pred;
  try {
    for (const auto& it : test) {
      const auto s = backend.similarities(store.image(it.image_ref), class_prompts);
      if (s.size() != 2) throw BackendError("backend returned " + std::to_string(s.size()) + " scores");
      pred.push_back(one_hot(zero_shot_argmax(s[0], s[1])));
      truth.push_back(it.label_vector);
    }
  } catch (const BackendError& e) {
    res.skipped = true;
    res.annotation = std::string("skipped: ") + e.what();
    return res;
  }
  res.entry.counts = micro_counts(truth, pred);
  res.entry.prf = prf_from_counts(res.entry.counts);
  res.entry.n_items = test.size();
  return res;
}

EvalEntry linear_probe(const embedding::EmbeddingBackend& frozen, std::span<const ManifestItem> train_items,
                       std::span<const ManifestItem> test, const TrainConfig& config, ImageStore& store) {
  config.validate();
  if (train_items.empty()) throw DataError("linear probe needs training items");
  try {
    check_both_classes(train_items, "linear-probe training manifest");
  } catch (const DataError& e) {
    throw DataError(std::string("degenerate single-class training manifest: ") + e.what());
  }
  check_disjoint(groups_of(train_items), test, "probe test");

  std::vector<cv::Mat> views;
  for (const auto& it : train_items) views.push_back(transform_eval(store.image(it.image_ref), config.input_size));
  const Matrix raw = embed_all(frozen, views);
  const Standardizer standardizer = Standardizer::fit(raw);
  const Matrix x = standardizer.apply(raw);
  const Matrix y = label_matrix(train_items);

  Rng init_rng(mix_seed(config.seed, "probe_init"));
  Head head(frozen.dimension(), 0, init_rng);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng order(mix_seed(config.seed, "probe_order/" + std::to_string(epoch)));
    fit_epoch(head, x, y, config.batch_size, config.optimizer, order, nullptr);
  }

  views.clear();
  for (const auto& it : test) views.push_back(transform_eval(store.image(it.image_ref), config.input_size));
  return score(head.logits(standardizer.apply(embed_all(frozen, views))), test);
}

}  // namespace synthaug::classifier
