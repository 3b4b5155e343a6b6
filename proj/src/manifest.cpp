#include "synthaug/manifest.hpp"

#include "synthaug/common/errors.hpp"

namespace synthaug {

std::string_view to_string(Source s) { return s == Source::kReal ? "real" : "synthetic"; }

Source parse_source(std::string_view s) {
  if (s == "real") return Source::kReal;
  if (s == "synthetic") return Source::kSynthetic;
  throw ManifestError("unknown source tag '" + std::string(s) + "'");
}

json to_json(const ManifestItem& item) {
  json j{{"image_id", item.image_id},
         {"image_ref", item.image_ref},
         {"label_vector", to_json(item.label_vector)},
         {"source", to_string(item.source)},
         {"transform_policy", item.transform_policy}};
  if (!item.group_id.empty()) j["group_id"] = item.group_id;
  if (!item.source_path.empty()) j["source_path"] = item.source_path;
  if (item.crop_box) j["crop_box"] = to_json(*item.crop_box);
  if (item.distance) j["distance"] = *item.distance;
  if (item.rank) j["rank"] = *item.rank;
  return j;
}

ManifestItem manifest_item_from_json(const json& j) {
  ManifestItem item;
  try {
    item.image_id = j.at("image_id").get<std::string>();
    item.image_ref = j.at("image_ref").get<std::string>();
    item.label_vector = label_vector_from_json(j.at("label_vector"));
    item.source = parse_source(j.at("source").get<std::string>());
    item.transform_policy = j.at("transform_policy").get<std::string>();
    item.group_id = j.value("group_id", std::string());
    item.source_path = j.value("source_path", std::string());
    if (j.contains("crop_box")) item.crop_box = box_from_json(j["crop_box"]);
    if (j.contains("distance")) item.distance = j["distance"].get<double>();
    if (j.contains("rank")) item.rank = j["rank"].get<int>();
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest row: ") + e.what());
  }
  return item;
}

void write_manifest(const std::filesystem::path& path, const TrainingManifest& manifest) {
  std::vector<json> rows;
  rows.reserve(manifest.items.size());
  for (const auto& item : manifest.items) rows.push_back(to_json(item));
  write_jsonl(path, rows);
  if (!manifest.metadata.empty()) {
    auto meta = path;
    meta += ".meta.json";
    write_json_file(meta, manifest.metadata);
  }
}

TrainingManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("manifest not found: " + path.string());
  TrainingManifest m;
  for (const auto& row : read_jsonl(path)) m.items.push_back(manifest_item_from_json(row));
  auto meta = path;
  meta += ".meta.json";
  if (std::filesystem::exists(meta)) m.metadata = read_json_file(meta);
  return m;
}

ManifestItem manifest_item_from_record(const dataset::ImageRecord& r, std::string_view policy) {
  ManifestItem item;
  item.image_id = r.image_id;
  item.image_ref = r.crop_path.empty() ? r.source_path : r.crop_path;
  item.source_path = r.source_path;
  item.crop_box = r.crop_box;
  item.group_id = r.group_id;
  item.label_vector = r.label_vector;
  item.source = Source::kReal;
  item.transform_policy = std::string(policy);
  return item;
}

TrainingManifest manifest_from_records(std::span<const dataset::ImageRecord> records,
                                       std::string_view policy) {
  TrainingManifest m;
  for (const auto& r : records) m.items.push_back(manifest_item_from_record(r, policy));
  return m;
}

}  // namespace synthaug
