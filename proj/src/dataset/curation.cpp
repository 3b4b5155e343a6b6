#include "synthaug/dataset/curation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/random.hpp"

namespace synthaug::dataset {

void validate_annotation(const Annotation& a, std::optional<ImageSize> image_size) {
  if (a.image_id.empty()) throw CurationError("annotation without image_id");
  if (!a.bbox.valid()) {
    throw CurationError("image " + a.image_id + ": degenerate bbox (need x_min < x_max, y_min < y_max)");
  }
  if (a.defect_labels.empty()) throw CurationError("image " + a.image_id + ": empty defect_labels");
  if (image_size) {
    if (a.bbox.x_min < 0 || a.bbox.y_min < 0 || a.bbox.x_max > image_size->width ||
        a.bbox.y_max > image_size->height) {
      throw CurationError("image " + a.image_id + ": bbox outside image bounds " +
                          std::to_string(image_size->width) + "x" +
                          std::to_string(image_size->height));
    }
  }
}

Annotation annotation_from_json(const json& j) {
  Annotation a;
  try {
    a.image_id = j.at("image_id").get<std::string>();
    a.group_id = j.at("group_id").get<std::string>();
    a.bbox = box_from_json(j.at("bbox"));
    for (const auto& l : j.at("defect_labels")) a.defect_labels.insert(parse_defect_class(l.get<std::string>()));
    a.file = j.value("file", a.image_id + ".png");
  } catch (const json::exception& e) {
    throw CurationError(std::string("malformed annotation: ") + e.what());
  }
  return a;
}

json to_json(const Annotation& a) {
  json labels = json::array();
  for (auto c : a.defect_labels) labels.push_back(to_string(c));
  return json{{"image_id", a.image_id},
              {"group_id", a.group_id},
              {"bbox", to_json(a.bbox)},
              {"defect_labels", labels},
              {"file", a.file}};
}

std::vector<Annotation> read_annotations(const fs::path& path) {
  std::vector<Annotation> out;
  for (const auto& row : read_jsonl(path)) {
    out.push_back(annotation_from_json(row));
    validate_annotation(out.back());
  }
  return out;
}

Box compute_tight_crop(std::string_view image_id, std::span<const Box> boxes) {
  if (boxes.empty()) {
    throw CurationError("image " + std::string(image_id) + ": no annotations to crop");
  }
  Box out = boxes.front();
  for (const auto& b : boxes) {
    if (!b.valid()) throw CurationError("image " + std::string(image_id) + ": degenerate bbox");
    out.x_min = std::min(out.x_min, b.x_min);
    out.y_min = std::min(out.y_min, b.y_min);
    out.x_max = std::max(out.x_max, b.x_max);
    out.y_max = std::max(out.y_max, b.y_max);
  }
  return out;
}

std::vector<RawGroup> group_annotations(std::span<const Annotation> annotations,
                                        const fs::path& images_dir) {
  struct ImageAcc {
    std::string group_id;
    std::string file;
    std::vector<Box> boxes;
    std::set<DefectClass> labels;
  };
  std::map<std::string, ImageAcc> images;
  for (const auto& a : annotations) {
    auto [it, inserted] = images.try_emplace(a.image_id);
    ImageAcc& acc = it->second;
    if (inserted) {
      acc.group_id = a.group_id;
      acc.file = a.file;
    } else if (acc.group_id != a.group_id) {
      throw CurationError("image " + a.image_id + " is annotated under two groups (" +
                          acc.group_id + ", " + a.group_id + ")");
    }
    acc.boxes.push_back(a.bbox);
    acc.labels.insert(a.defect_labels.begin(), a.defect_labels.end());
  }

  std::map<std::string, RawGroup> groups;
  for (auto& [image_id, acc] : images) {
    RawGroup& g = groups[acc.group_id];
    g.group_id = acc.group_id;
    RawImage img;
    img.image_id = image_id;
    img.labels = acc.labels;
    img.crop_box = compute_tight_crop(image_id, acc.boxes);
    img.source_path = images_dir.empty() ? acc.file : (images_dir / acc.file).string();
    g.images.push_back(std::move(img));
  }
  std::vector<RawGroup> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

json to_json(const ImageRecord& r) {
  return json{{"image_id", r.image_id},       {"group_id", r.group_id},
              {"label_vector", to_json(r.label_vector)},
              {"crop_box", to_json(r.crop_box)}, {"source_path", r.source_path},
              {"crop_path", r.crop_path}};
}

ImageRecord image_record_from_json(const json& j) {
  ImageRecord r;
  try {
    r.image_id = j.at("image_id").get<std::string>();
    r.group_id = j.at("group_id").get<std::string>();
    r.label_vector = label_vector_from_json(j.at("label_vector"));
    r.crop_box = box_from_json(j.at("crop_box"));
    r.source_path = j.at("source_path").get<std::string>();
    r.crop_path = j.value("crop_path", std::string());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed image record: ") + e.what());
  }
  class_of(r.label_vector);
  return r;
}

std::vector<ImageRecord> read_records(const fs::path& path) {
  std::vector<ImageRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(image_record_from_json(row));
  return out;
}

void write_records(const fs::path& path, std::span<const ImageRecord> records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

CurationResult curate_groups(std::span<const RawGroup> raw_groups) {
  CurationResult out;
  std::unordered_set<std::string> seen;
  for (const auto& g : raw_groups) {
    if (!seen.insert(g.group_id).second) {
      throw CurationError("duplicate group id " + g.group_id);
    }
    std::set<DefectClass> labels;
    std::vector<const RawImage*> labeled;
    for (const auto& img : g.images) {
      if (img.labels.empty()) continue;
      labels.insert(img.labels.begin(), img.labels.end());
      labeled.push_back(&img);
    }
    if (labeled.empty()) {
      out.dropped.push_back({g.group_id, "no labeled images"});
      continue;
    }
    if (labels.size() > 1) {
      out.dropped.push_back({g.group_id, "dual-defect (shell+glaze)"});
      continue;
    }
    InsulatorGroup kept;
    kept.group_id = g.group_id;
    kept.class_label = *labels.begin();
    for (const RawImage* img : labeled) {
      kept.image_ids.push_back(img->image_id);
      ImageRecord r;
      r.image_id = img->image_id;
      r.group_id = g.group_id;
      r.label_vector = one_hot(kept.class_label);
      r.crop_box = img->crop_box;
      r.source_path = img->source_path;
      out.records.push_back(std::move(r));
    }
    out.groups.push_back(std::move(kept));
  }
  return out;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(s) + "'");
}

SplitCounts split_counts(std::size_t n_groups, const SplitRatios& ratios) {
  const double n = static_cast<double>(n_groups);
  SplitCounts c;
  c.val = static_cast<std::size_t>(std::llround(ratios.val * n));
  c.test = static_cast<std::size_t>(std::llround(ratios.test * n));
  if (c.val + c.test > n_groups) throw ConfigError("split ratios leave no training groups");
  c.train = n_groups - c.val - c.test;
  return c;
}

std::vector<std::string> SplitAssignment::groups_in(Split s) const {
  std::vector<std::string> out;
  for (const auto& [g, split] : assignment) {
    if (split == s) out.push_back(g);
  }
  return out;
}

SplitAssignment group_split(std::span<const std::string> group_ids, const SplitRatios& ratios,
                            std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1.0");
  }
  if (group_ids.size() < 3) {
    throw ConfigError("need at least 3 groups for a train/val/test split, got " +
                      std::to_string(group_ids.size()));
  }
  std::vector<std::string> ids(group_ids.begin(), group_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ConfigError("duplicate group ids in split input");
  }
  Rng rng(mix_seed(seed, "group_split"));
  shuffle(std::span<std::string>(ids), rng);

  const SplitCounts counts = split_counts(ids.size(), ratios);
  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Split s = Split::kTest;
    if (i < counts.train) {
      s = Split::kTrain;
    } else if (i < counts.train + counts.val) {
      s = Split::kVal;
    }
    out.assignment.emplace(ids[i], s);
  }
  return out;
}

json to_json(const SplitAssignment& s) {
  json assignment = json::object();
  for (const auto& [g, split] : s.assignment) assignment[g] = to_string(split);
  return json{{"seed", s.seed},
              {"ratios", {s.ratios.train, s.ratios.val, s.ratios.test}},
              {"assignment", assignment}};
}

SplitAssignment split_assignment_from_json(const json& j) {
  SplitAssignment s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("ratios");
    s.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    for (const auto& [g, split] : j.at("assignment").items()) {
      s.assignment.emplace(g, parse_split(split.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed splits.json: ") + e.what());
  }
  return s;
}

const std::vector<std::string>& FractionPlan::groups_for(double fraction) const {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (std::abs(fractions[i] - fraction) < 1e-9) return group_sets[i];
  }
  throw LookupError("fraction " + std::to_string(fraction) + " is not in the fraction plan");
}

FractionPlan fraction_subsets(std::span<const std::string> train_groups,
                              std::span<const double> fractions, std::uint64_t seed) {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0) || fractions[i] > 1.0) {
      throw ConfigError("fraction " + std::to_string(fractions[i]) + " outside (0, 1]");
    }
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw ConfigError("fractions must be strictly ascending");
    }
  }
  std::vector<std::string> ids(train_groups.begin(), train_groups.end());
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, "fraction_subsets"));
  shuffle(std::span<std::string>(ids), rng);

  FractionPlan plan;
  plan.seed = seed;
  plan.fractions.assign(fractions.begin(), fractions.end());
  const double n = static_cast<double>(ids.size());
  for (double f : fractions) {
    // The epsilon keeps 0.3 x 10 from becoming 4 through representation error.
    const auto k = static_cast<std::size_t>(std::ceil(f * n - 1e-9));
    std::vector<std::string> set(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(set.begin(), set.end());
    plan.group_sets.push_back(std::move(set));
  }
  return plan;
}

json to_json(const FractionPlan& p) {
  json fractions = json::array();
  for (std::size_t i = 0; i < p.fractions.size(); ++i) {
    fractions.push_back(json{{"fraction", p.fractions[i]}, {"group_ids", p.group_sets[i]}});
  }
  return json{{"seed", p.seed}, {"fractions", fractions}};
}

FractionPlan fraction_plan_from_json(const json& j) {
  FractionPlan p;
  try {
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("fractions")) {
      p.fractions.push_back(f.at("fraction").get<double>());
      p.group_sets.push_back(f.at("group_ids").get<std::vector<std::string>>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fractions.json: ") + e.what());
  }
  return p;
}

std::vector<ImageRecord> records_in_groups(std::span<const ImageRecord> records,
                                           std::span<const std::string> group_ids) {
  const std::unordered_set<std::string> wanted(group_ids.begin(), group_ids.end());
  std::vector<ImageRecord> out;
  for (const auto& r : records) {
    if (wanted.contains(r.group_id)) out.push_back(r);
  }
  return out;
}

}  // namespace synthaug::dataset
