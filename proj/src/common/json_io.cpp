#include "synthaug/common/json_io.hpp"

#include <fstream>
#include <sstream>

#include "synthaug/common/errors.hpp"

namespace synthaug {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

void append_jsonl(const fs::path& path, const json& row) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to " + path.string());
  out << row.dump() << '\n';
  out.flush();
  if (!out) throw DataError("append failed for " + path.string());
}

json to_json(const Box& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("bbox must be [x_min, y_min, x_max, y_max]");
  return Box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json to_json(const LabelVector& v) { return json::array({v[0], v[1]}); }

LabelVector label_vector_from_json(const json& j) {
  if (!j.is_array() || j.size() != kNumClasses) throw DataError("label_vector must have 2 entries");
  return LabelVector{j[0].get<int>(), j[1].get<int>()};
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
  if (!obj.is_object()) throw ConfigError(std::string(context) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(context));
  }
}

}  // namespace synthaug
