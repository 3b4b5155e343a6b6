#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthaug/common/types.hpp"

namespace synthaug {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json_file(const fs::path& path);
// Writes pretty-printed JSON through a temp file + rename.
void write_json_file(const fs::path& path, const json& value);

std::vector<json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<json>& rows);
// Appends one compact line and flushes before returning.
void append_jsonl(const fs::path& path, const json& row);

// Atomic replace: write to `<path>.tmp` then rename over `path`.
void write_text_file(const fs::path& path, const std::string& contents);
std::string read_text_file(const fs::path& path);

json to_json(const Box& b);
Box box_from_json(const json& j);
json to_json(const LabelVector& v);
LabelVector label_vector_from_json(const json& j);

// Throws ConfigError listing any key of `obj` not in `allowed`.
void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

}  // namespace synthaug
