#pragma once

// TrainingManifest: the unit exchanged between selection and training.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthaug/common/json_io.hpp"
#include "synthaug/common/types.hpp"
#include "synthaug/dataset/curation.hpp"

namespace synthaug {

enum class Source { kReal, kSynthetic };
std::string_view to_string(Source s);
Source parse_source(std::string_view s);

// Transform policy ids carried by manifest items.
inline constexpr std::string_view kPolicyRealTrain = "real_train";
inline constexpr std::string_view kPolicySyntheticTrain = "synthetic_train";
inline constexpr std::string_view kPolicyEval = "eval";

struct ManifestItem {
  std::string image_id;
  // Path of the image the model sees (a crop for real images).
  std::string image_ref;
  // Real images only: the uncropped source and the tight crop within it,
  // used for random crop expansion.
  std::string source_path;
  std::optional<Box> crop_box;
  // Empty for synthetic images.
  std::string group_id;
  LabelVector label_vector{0, 0};
  Source source = Source::kReal;
  std::string transform_policy = std::string(kPolicyEval);
  std::optional<double> distance;
  std::optional<int> rank;

  DefectClass defect_class() const { return class_of(label_vector); }
};

struct TrainingManifest {
  std::vector<ManifestItem> items;
  // Free-form provenance: centroid sources, selection config, and so on.
  json metadata = json::object();
};

json to_json(const ManifestItem& item);
ManifestItem manifest_item_from_json(const json& j);

// Rows go to `path` as JSON lines; metadata, when non-empty, to
// `<path>.meta.json`.
void write_manifest(const std::filesystem::path& path, const TrainingManifest& manifest);
TrainingManifest read_manifest(const std::filesystem::path& path);

ManifestItem manifest_item_from_record(const dataset::ImageRecord& r, std::string_view policy);
TrainingManifest manifest_from_records(std::span<const dataset::ImageRecord> records,
                                       std::string_view policy);

}  // namespace synthaug
