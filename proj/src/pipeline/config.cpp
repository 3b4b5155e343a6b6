#include "synthaug/pipeline/config.hpp"

#include <cstdlib>

#include "synthaug/common/errors.hpp"

namespace synthaug::pipeline {

namespace {

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || dir.empty() ? path : (dir / path).lexically_normal();
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view ctx) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(ctx) + "." + key + " has the wrong type");
  }
}

std::string interpolate_string(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
      const auto end = s.find('}', i + 2);
      if (end == std::string::npos) throw ConfigError("unterminated ${ in config value '" + s + "'");
      const std::string name = s.substr(i + 2, end - i - 2);
      const char* v = std::getenv(name.c_str());
      if (!v) throw ConfigError("config references unset environment variable " + name);
      out += v;
      i = end + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

}  // namespace

std::vector<BatchPlan> PipelineConfig::default_batches() {
  std::vector<BatchPlan> out;
  for (int i = 0; i < 8; ++i) {
    out.push_back(BatchPlan{"batch" + std::to_string(i), i < 3 ? "V1" : "V2", prompts::PromptMode::kDualRef});
  }
  return out;
}

json interpolate_env(const json& value) {
  if (value.is_string()) return interpolate_string(value.get<std::string>());
  if (value.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : value.items()) out[k] = interpolate_env(v);
    return out;
  }
  if (value.is_array()) {
    json out = json::array();
    for (const auto& v : value) out.push_back(interpolate_env(v));
    return out;
  }
  return value;
}

PipelineConfig parse_pipeline_config(const json& raw_in, const std::filesystem::path& config_dir) {
  const json raw = interpolate_env(raw_in);
  reject_unknown_keys(raw,
                      {"dataset", "split", "seed", "fractions", "reference_fraction", "generator", "generation",
                       "embedding", "selection", "comparison", "train", "seeds", "sweep_randaugment", "zero_shot",
                       "pricing", "review", "runs_root", "tag"},
                      "config");
  PipelineConfig c;
  c.config_dir = config_dir;
  c.generation.batches = PipelineConfig::default_batches();

  if (raw.contains("dataset")) {
    const auto& d = raw["dataset"];
    reject_unknown_keys(d, {"annotations", "images_dir"}, "dataset");
    std::string ann, img;
    read(d, "annotations", ann, "dataset");
    read(d, "images_dir", img, "dataset");
    c.dataset.annotations = resolve(config_dir, ann);
    c.dataset.images_dir = resolve(config_dir, img);
  }
  if (raw.contains("split")) {
    const auto& s = raw["split"];
    reject_unknown_keys(s, {"train", "val", "test"}, "split");
    read(s, "train", c.split.train, "split");
    read(s, "val", c.split.val, "split");
    read(s, "test", c.split.test, "split");
  }
  read(raw, "seed", c.seed, "config");
  read(raw, "fractions", c.fractions, "config");
  read(raw, "reference_fraction", c.reference_fraction, "config");
  if (raw.contains("generator")) {
    const auto& g = raw["generator"];
    reject_unknown_keys(g,
                        {"backend", "image_size", "mock_composite", "endpoint", "model", "api_key_env", "timeout_seconds",
                         "max_parallel", "budget_factor", "max_retries", "initial_backoff_ms"},
                        "generator");
    auto& o = c.generator;
    read(g, "backend", o.backend, "generator");
    read(g, "image_size", o.image_size, "generator");
    std::string composite(generation::to_string(o.mock_composite));
    read(g, "mock_composite", composite, "generator");
    o.mock_composite = generation::parse_mock_composite(composite);
    read(g, "endpoint", o.endpoint, "generator");
    read(g, "model", o.model, "generator");
    read(g, "api_key_env", o.api_key_env, "generator");
    read(g, "timeout_seconds", o.timeout_seconds, "generator");
    read(g, "max_parallel", o.max_parallel, "generator");
    read(g, "budget_factor", o.budget_factor, "generator");
    read(g, "max_retries", o.max_retries, "generator");
    read(g, "initial_backoff_ms", o.initial_backoff_ms, "generator");
  }
  if (raw.contains("generation")) {
    const auto& g = raw["generation"];
    reject_unknown_keys(g, {"target_per_class", "batches", "prompts_dir"}, "generation");
    read(g, "target_per_class", c.generation.target_per_class, "generation");
    std::string pd;
    read(g, "prompts_dir", pd, "generation");
    c.generation.prompts_dir = resolve(config_dir, pd);
    if (g.contains("batches")) {
      c.generation.batches.clear();
      for (const auto& b : g["batches"]) {
        reject_unknown_keys(b, {"batch_id", "prompt_version", "prompt_mode"}, "generation.batches[]");
        BatchPlan p;
        read(b, "batch_id", p.batch_id, "generation.batches[]");
        read(b, "prompt_version", p.prompt_version, "generation.batches[]");
        std::string mode = std::string(prompts::to_string(p.prompt_mode));
        read(b, "prompt_mode", mode, "generation.batches[]");
        try {
          p.prompt_mode = prompts::parse_prompt_mode(mode);
        } catch (const Error& e) {
          throw ConfigError(std::string("generation.batches[]: ") + e.what());
        }
        c.generation.batches.push_back(p);
      }
    }
  }
  if (raw.contains("embedding")) {
    const auto& e = raw["embedding"];
    reject_unknown_keys(e, {"backend", "dimension", "model", "input_size", "batch_size"}, "embedding");
    read(e, "backend", c.embedding.backend, "embedding");
    read(e, "dimension", c.embedding.dimension, "embedding");
    std::string m;
    read(e, "model", m, "embedding");
    c.embedding.model = resolve(config_dir, m);
    read(e, "input_size", c.embedding.input_size, "embedding");
    read(e, "batch_size", c.embedding.batch_size, "embedding");
  }
  if (raw.contains("selection")) {
    const auto& s = raw["selection"];
    reject_unknown_keys(s, {"n_per_class", "multiples", "pool_batches"}, "selection");
    read(s, "n_per_class", c.selection.n_per_class, "selection");
    read(s, "multiples", c.selection.multiples, "selection");
    read(s, "pool_batches", c.selection.pool_batches, "selection");
  }
  if (raw.contains("comparison")) {
    const auto& s = raw["comparison"];
    reject_unknown_keys(s, {"manual_batches"}, "comparison");
    read(s, "manual_batches", c.comparison.manual_batches, "comparison");
  }
  if (raw.contains("train")) c.train = classifier::train_config_from_json(raw["train"]);
  read(raw, "seeds", c.seeds, "config");
  read(raw, "sweep_randaugment", c.sweep_randaugment, "config");
  if (raw.contains("zero_shot")) {
    const auto& z = raw["zero_shot"];
    reject_unknown_keys(z, {"backend", "image_model", "text_embeddings", "class_prompts"}, "zero_shot");
    read(z, "backend", c.zero_shot.backend, "zero_shot");
    std::string im, te;
    read(z, "image_model", im, "zero_shot");
    read(z, "text_embeddings", te, "zero_shot");
    c.zero_shot.image_model = resolve(config_dir, im);
    c.zero_shot.text_embeddings = resolve(config_dir, te);
    read(z, "class_prompts", c.zero_shot.class_prompts, "zero_shot");
  }
  if (raw.contains("pricing")) c.pricing = reporting::pricing_from_json(raw["pricing"]);
  if (raw.contains("review")) {
    const auto& r = raw["review"];
    reject_unknown_keys(r, {"host", "port", "static_dir"}, "review");
    read(r, "host", c.review.host, "review");
    read(r, "port", c.review.port, "review");
    std::string sd;
    read(r, "static_dir", sd, "review");
    c.review.static_dir = resolve(config_dir, sd);
  }
  std::string root = c.runs_root.string();
  read(raw, "runs_root", root, "config");
  c.runs_root = resolve(config_dir, root);
  read(raw, "tag", c.tag, "config");

  // Validation.
  const double sum = c.split.train + c.split.val + c.split.test;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (c.fractions.empty()) throw ConfigError("fractions must not be empty");
  if (!(c.reference_fraction > 0.0 && c.reference_fraction <= 1.0)) {
    throw ConfigError("reference_fraction must be in (0, 1]");
  }
  if (c.generator.backend != "mock" && c.generator.backend != "http") {
    throw ConfigError("generator.backend must be 'mock' or 'http'");
  }
  if (c.generator.max_parallel < 1) throw ConfigError("generator.max_parallel must be >= 1");
  if (c.generator.budget_factor < 1.0) throw ConfigError("generator.budget_factor must be >= 1");
  if (c.generator.max_retries < 0) throw ConfigError("generator.max_retries must be >= 0");
  if (c.generation.target_per_class < 1) throw ConfigError("generation.target_per_class must be >= 1");
  for (const auto& b : c.generation.batches) {
    if (b.batch_id.empty()) throw ConfigError("every generation batch needs a batch_id");
  }
  if (c.embedding.backend != "hash-projection" && c.embedding.backend != "onnx") {
    throw ConfigError("embedding.backend must be 'hash-projection' or 'onnx'");
  }
  if (c.embedding.backend == "onnx" && c.embedding.model.empty()) {
    throw ConfigError("embedding.model is required for the onnx backend");
  }
  for (int n : c.selection.n_per_class) {
    if (n < 1) throw ConfigError("selection.n_per_class entries must be >= 1");
  }
  for (int m : c.selection.multiples) {
    if (m < 1) throw ConfigError("selection.multiples entries must be >= 1");
  }
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.zero_shot.backend != "none" && c.zero_shot.backend != "mock" && c.zero_shot.backend != "onnx") {
    throw ConfigError("zero_shot.backend must be 'none', 'mock' or 'onnx'");
  }
  if (c.tag.empty() || c.tag.find('/') != std::string::npos) throw ConfigError("tag must be a plain name");
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json raw;
  try {
    raw = read_json_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_pipeline_config(raw, std::filesystem::absolute(path).parent_path());
}

json to_json(const PipelineConfig& c) {
  json batches = json::array();
  for (const auto& b : c.generation.batches) {
    batches.push_back({{"batch_id", b.batch_id},
                       {"prompt_version", b.prompt_version},
                       {"prompt_mode", prompts::to_string(b.prompt_mode)}});
  }
  const auto& g = c.generator;
  return {{"dataset", {{"annotations", c.dataset.annotations.string()}, {"images_dir", c.dataset.images_dir.string()}}},
          {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
          {"seed", c.seed},
          {"fractions", c.fractions},
          {"reference_fraction", c.reference_fraction},
          {"generator",
           {{"backend", g.backend},
            {"image_size", g.image_size},
            {"mock_composite", generation::to_string(g.mock_composite)},
            {"endpoint", g.endpoint},
            {"model", g.model},
            {"api_key_env", g.api_key_env},
            {"timeout_seconds", g.timeout_seconds},
            {"max_parallel", g.max_parallel},
            {"budget_factor", g.budget_factor},
            {"max_retries", g.max_retries},
            {"initial_backoff_ms", g.initial_backoff_ms}}},
          {"generation",
           {{"target_per_class", c.generation.target_per_class},
            {"batches", batches},
            {"prompts_dir", c.generation.prompts_dir.string()}}},
          {"embedding",
           {{"backend", c.embedding.backend},
            {"dimension", c.embedding.dimension},
            {"model", c.embedding.model.string()},
            {"input_size", c.embedding.input_size},
            {"batch_size", c.embedding.batch_size}}},
          {"selection",
           {{"n_per_class", c.selection.n_per_class},
            {"multiples", c.selection.multiples},
            {"pool_batches", c.selection.pool_batches}}},
          {"comparison", {{"manual_batches", c.comparison.manual_batches}}},
          {"train", classifier::to_json(c.train)},
          {"seeds", c.seeds},
          {"sweep_randaugment", c.sweep_randaugment},
          {"zero_shot",
           {{"backend", c.zero_shot.backend},
            {"image_model", c.zero_shot.image_model.string()},
            {"text_embeddings", c.zero_shot.text_embeddings.string()},
            {"class_prompts", c.zero_shot.class_prompts}}},
          {"pricing", reporting::to_json(c.pricing)},
          {"review", {{"host", c.review.host}, {"port", c.review.port}, {"static_dir", c.review.static_dir.string()}}},
          {"runs_root", c.runs_root.string()},
          {"tag", c.tag}};
}

}  // namespace synthaug::pipeline
