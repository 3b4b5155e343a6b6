#include "synthaug/prompts/registry.hpp"

#include <mutex>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"

namespace synthaug::prompts {

std::string_view to_string(PromptMode m) {
  return m == PromptMode::kDualRef ? "dual_ref" : "single_ref";
}

PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "dual_ref") return PromptMode::kDualRef;
  if (s == "single_ref") return PromptMode::kSingleRef;
  throw ConfigError("unknown prompt mode '" + std::string(s) + "' (expected single_ref or dual_ref)");
}

std::string PromptTemplate::id() const {
  return std::string(synthaug::to_string(defect_class)) + "/" + version + "/" +
         std::string(to_string(mode));
}

void validate(const PromptTemplate& t) {
  if (t.version.empty()) throw ValidationError("prompt version must be non-empty");
  if (t.text.empty()) throw ValidationError("prompt " + t.id() + " has empty text");
  for (const auto& clause : t.required_clauses) {
    if (t.text.find(clause) == std::string::npos) {
      throw ValidationError("prompt " + t.id() + " is missing required clause \"" + clause + "\"");
    }
  }
}

PromptRegistry::PromptRegistry(const PromptRegistry& other) {
  std::shared_lock lock(other.mu_);
  templates_ = other.templates_;
  dir_ = other.dir_;
}

PromptRegistry PromptRegistry::with_defaults() {
  PromptRegistry r;
  for (const auto& t : default_templates()) r.register_prompt(t);
  return r;
}

PromptTemplate PromptRegistry::get(DefectClass c, std::string_view version, PromptMode mode) const {
  std::shared_lock lock(mu_);
  auto it = templates_.find(Key{c, std::string(version), mode});
  if (it != templates_.end()) return it->second;
  std::string available;
  for (const auto& [key, t] : templates_) {
    if (std::get<0>(key) == c && std::get<2>(key) == mode) {
      if (!available.empty()) available += ", ";
      available += t.version;
    }
  }
  throw LookupError("no prompt " + std::string(synthaug::to_string(c)) + "/" +
                    std::string(version) + "/" + std::string(to_string(mode)) +
                    "; available versions: [" + available + "]");
}

std::string PromptRegistry::register_prompt(const PromptTemplate& t) {
  validate(t);
  std::unique_lock lock(mu_);
  Key key{t.defect_class, t.version, t.mode};
  if (templates_.contains(key)) {
    throw ConflictError("prompt " + t.id() + " already registered; register a new version instead");
  }
  templates_.emplace(key, t);
  if (!dir_.empty()) {
    write_entry(t);
    write_index();
  }
  return t.id();
}

std::vector<std::string> PromptRegistry::versions(DefectClass c, PromptMode mode) const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [key, t] : templates_) {
    if (std::get<0>(key) == c && std::get<2>(key) == mode) out.push_back(t.version);
  }
  return out;
}

std::size_t PromptRegistry::size() const {
  std::shared_lock lock(mu_);
  return templates_.size();
}

namespace {
std::string relative_file(const PromptTemplate& t) {
  return std::string(synthaug::to_string(t.defect_class)) + "/" + t.version + "_" +
         std::string(to_string(t.mode)) + ".txt";
}
}  // namespace

void PromptRegistry::write_entry(const PromptTemplate& t) const {
  const fs::path file = dir_ / relative_file(t);
  if (fs::exists(file)) {
    // Stored templates are immutable; refuse to overwrite a differing file.
    if (read_text_file(file) != t.text) {
      throw ConflictError("prompt file " + file.string() + " already exists with different text");
    }
    return;
  }
  write_text_file(file, t.text);
}

void PromptRegistry::write_index() const {
  json entries = json::array();
  for (const auto& [_, t] : templates_) {
    entries.push_back(json{{"class", synthaug::to_string(t.defect_class)},
                           {"version", t.version},
                           {"mode", to_string(t.mode)},
                           {"file", relative_file(t)},
                           {"required_clauses", t.required_clauses}});
  }
  write_json_file(dir_ / "index.json", json{{"prompts", entries}});
}

void PromptRegistry::save(const std::filesystem::path& dir) {
  std::unique_lock lock(mu_);
  dir_ = dir;
  for (const auto& [_, t] : templates_) write_entry(t);
  write_index();
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& dir) {
  const fs::path index = dir / "index.json";
  if (!fs::exists(index)) throw MissingArtifactError("prompt index not found: " + index.string());
  PromptRegistry r;
  const json j = read_json_file(index);
  try {
    for (const auto& e : j.at("prompts")) {
      PromptTemplate t;
      t.defect_class = parse_defect_class(e.at("class").get<std::string>());
      t.version = e.at("version").get<std::string>();
      t.mode = parse_prompt_mode(e.at("mode").get<std::string>());
      t.text = read_text_file(dir / e.at("file").get<std::string>());
      t.required_clauses = e.value("required_clauses", std::vector<std::string>{});
      r.register_prompt(t);
    }
  } catch (const json::exception& e) {
    throw DataError("malformed prompt index " + index.string() + ": " + e.what());
  }
  r.dir_ = dir;
  return r;
}

}  // namespace synthaug::prompts
