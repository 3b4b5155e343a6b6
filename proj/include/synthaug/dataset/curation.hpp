#pragma once

// Annotation ingestion, tight crops, label curation, and leakage-free group
// splits. All functions are pure over their inputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthaug/common/json_io.hpp"
#include "synthaug/common/types.hpp"

namespace synthaug::dataset {

using ::synthaug::to_json;

// One line of annotations.jsonl. `group_id` names the physical insulator the
// image shows; `file` is relative to the images directory (defaults to
// "<image_id>.png").
struct Annotation {
  std::string image_id;
  std::string group_id;
  Box bbox;
  std::set<DefectClass> defect_labels;
  std::string file;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

// Throws CurationError naming the image when the annotation breaks an
// invariant (degenerate box, out-of-bounds box, no labels).
void validate_annotation(const Annotation& a, std::optional<ImageSize> image_size = std::nullopt);

Annotation annotation_from_json(const json& j);
json to_json(const Annotation& a);
std::vector<Annotation> read_annotations(const fs::path& path);

// Minimum enclosing rectangle over every box of one image.
Box compute_tight_crop(std::string_view image_id, std::span<const Box> boxes);

struct RawImage {
  std::string image_id;
  std::set<DefectClass> labels;
  Box crop_box;
  std::string source_path;
};

struct RawGroup {
  std::string group_id;
  std::vector<RawImage> images;
};

// Groups annotations by insulator and computes each image's tight crop.
// Output is sorted by group id, images by image id.
std::vector<RawGroup> group_annotations(std::span<const Annotation> annotations,
                                        const fs::path& images_dir = {});

struct InsulatorGroup {
  std::string group_id;
  std::vector<std::string> image_ids;
  DefectClass class_label = DefectClass::kShell;
};

struct ImageRecord {
  std::string image_id;
  std::string group_id;
  LabelVector label_vector{0, 0};
  Box crop_box;
  std::string source_path;
  // Where ingest wrote the cropped image; empty before ingest.
  std::string crop_path;

  DefectClass defect_class() const { return class_of(label_vector); }
};

json to_json(const ImageRecord& r);
ImageRecord image_record_from_json(const json& j);
std::vector<ImageRecord> read_records(const fs::path& path);
void write_records(const fs::path& path, std::span<const ImageRecord> records);

struct DroppedGroup {
  std::string group_id;
  std::string reason;
};

struct CurationResult {
  std::vector<InsulatorGroup> groups;
  std::vector<ImageRecord> records;
  std::vector<DroppedGroup> dropped;
};

// Keeps shell-only and glaze-only groups. Dual-defect groups and groups with
// no labeled image are dropped and reported in `dropped`.
CurationResult curate_groups(std::span<const RawGroup> raw_groups);

enum class Split { kTrain, kVal, kTest };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// val and test take round-to-nearest of ratio x n; train takes the rest.
SplitCounts split_counts(std::size_t n_groups, const SplitRatios& ratios);

struct SplitAssignment {
  std::map<std::string, Split> assignment;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  // Sorted group ids assigned to `s`.
  std::vector<std::string> groups_in(Split s) const;
};

SplitAssignment group_split(std::span<const std::string> group_ids, const SplitRatios& ratios,
                            std::uint64_t seed);

json to_json(const SplitAssignment& s);
SplitAssignment split_assignment_from_json(const json& j);

struct FractionPlan {
  std::vector<double> fractions;
  // group_sets[i] holds the sorted group ids of fractions[i].
  std::vector<std::vector<std::string>> group_sets;
  std::uint64_t seed = 0;

  // Throws LookupError when `fraction` is not part of the plan.
  const std::vector<std::string>& groups_for(double fraction) const;
};

// Nested group-level subsets: the set for a fraction f is the first
// ceil(f x n) ids of one seeded permutation of the sorted train groups.
FractionPlan fraction_subsets(std::span<const std::string> train_groups,
                              std::span<const double> fractions, std::uint64_t seed);

json to_json(const FractionPlan& p);
FractionPlan fraction_plan_from_json(const json& j);

// Records whose group is in `group_ids`, in input order.
std::vector<ImageRecord> records_in_groups(std::span<const ImageRecord> records,
                                           std::span<const std::string> group_ids);

}  // namespace synthaug::dataset
