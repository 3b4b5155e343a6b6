#pragma once

#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "synthaug/common/types.hpp"

namespace synthaug::prompts {

enum class PromptMode { kSingleRef, kDualRef };
std::string_view to_string(PromptMode m);
PromptMode parse_prompt_mode(std::string_view s);
inline int reference_count(PromptMode m) { return m == PromptMode::kDualRef ? 2 : 1; }

struct PromptTemplate {
  DefectClass defect_class = DefectClass::kShell;
  std::string version;
  PromptMode mode = PromptMode::kDualRef;
  std::string text;
  std::vector<std::string> required_clauses;

  // "<class>/<version>/<mode>"
  std::string id() const;
};

// Throws ValidationError if the text is empty or a required clause is absent.
void validate(const PromptTemplate& t);

// The six templates that ship with the tool: dual-reference V1 and V2 and
// single-reference V2 for both classes.
std::vector<PromptTemplate> default_templates();

// Append-only store of prompt templates. Reads may run concurrently;
// registration is serialized.
class PromptRegistry {
 public:
  PromptRegistry() = default;
  PromptRegistry(const PromptRegistry& other);
  PromptRegistry& operator=(const PromptRegistry&) = delete;

  static PromptRegistry with_defaults();

  // Loads `<dir>/index.json` and the text files it lists. When `dir` is
  // attached, later registrations are written back to it.
  static PromptRegistry load(const std::filesystem::path& dir);
  // Writes every template plus the index, and attaches `dir`.
  void save(const std::filesystem::path& dir);

  // Throws LookupError listing the registered versions on a miss.
  PromptTemplate get(DefectClass c, std::string_view version, PromptMode mode) const;

  // Returns the template id. Throws ValidationError or ConflictError.
  std::string register_prompt(const PromptTemplate& t);

  std::vector<std::string> versions(DefectClass c, PromptMode mode) const;
  std::size_t size() const;

 private:
  using Key = std::tuple<DefectClass, std::string, PromptMode>;
  void write_entry(const PromptTemplate& t) const;
  void write_index() const;

  mutable std::shared_mutex mu_;
  std::map<Key, PromptTemplate> templates_;
  std::filesystem::path dir_;
};

}  // namespace synthaug::prompts
