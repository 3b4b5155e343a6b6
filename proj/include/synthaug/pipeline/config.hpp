#pragma once

// PipelineConfig: one JSON file shared by every subcommand. String values may
// reference environment variables as ${NAME}; relative paths resolve against
// the config file's directory. Unknown keys are rejected everywhere.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthaug/classifier/harness.hpp"
#include "synthaug/common/json_io.hpp"
#include "synthaug/dataset/curation.hpp"
#include "synthaug/generation/backend.hpp"
#include "synthaug/prompts/registry.hpp"
#include "synthaug/reporting/report.hpp"

namespace synthaug::pipeline {

struct DatasetConfig {
  std::filesystem::path annotations;
  std::filesystem::path images_dir;
};

struct GeneratorConfig {
  // "mock" or "http".
  std::string backend = "mock";
  int image_size = 96;
  generation::MockComposite mock_composite = generation::MockComposite::kAlphaBlend;
  std::string endpoint;
  std::string model;
  std::string api_key_env = "GENERATOR_API_KEY";
  int timeout_seconds = 120;
  int max_parallel = 4;
  double budget_factor = 3.0;
  int max_retries = 3;
  int initial_backoff_ms = 500;
};

struct BatchPlan {
  std::string batch_id;
  std::string prompt_version = "V2";
  prompts::PromptMode prompt_mode = prompts::PromptMode::kDualRef;
};

struct GenerationPlan {
  int target_per_class = 52;
  std::vector<BatchPlan> batches;
  // Optional registry directory; the built-in templates are used otherwise.
  std::filesystem::path prompts_dir;
};

struct EmbeddingConfig {
  // "hash-projection" or "onnx".
  std::string backend = "hash-projection";
  int dimension = 512;
  std::filesystem::path model;
  int input_size = 224;
  int batch_size = 32;
};

struct SelectionPlan {
  // Explicit per-class counts, or multiples of the per-class size of the
  // reference fraction (smallest class) when `multiples` is set.
  std::vector<int> n_per_class{52, 104, 156};
  std::vector<int> multiples;
  // Batches whose accepted candidates form the pool; empty means all
  // dual-reference batches.
  std::vector<std::string> pool_batches;
};

struct ComparisonPlan {
  // Manual batch combinations trained for comparison, e.g. {{"batch3"}, {"batch3","batch4"}}.
  std::vector<std::vector<std::string>> manual_batches;
};

struct ZeroShotConfig {
  // "mock", "onnx" or "none".
  std::string backend = "none";
  std::filesystem::path image_model;
  std::filesystem::path text_embeddings;
  std::array<std::string, 2> class_prompts = classifier::kDefaultClassPrompts;
};

struct ReviewConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;
};

struct PipelineConfig {
  std::filesystem::path config_dir;
  DatasetConfig dataset;
  dataset::SplitRatios split;
  std::uint64_t seed = 0;
  std::vector<double> fractions{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double reference_fraction = 0.10;
  GeneratorConfig generator;
  GenerationPlan generation;
  EmbeddingConfig embedding;
  SelectionPlan selection;
  ComparisonPlan comparison;
  classifier::TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool sweep_randaugment = true;
  ZeroShotConfig zero_shot;
  reporting::PricingSchedule pricing;
  ReviewConfig review;
  std::filesystem::path runs_root = "runs";
  std::string tag = "run";

  // Default plan: eight dual-reference batches, V1 for 0-2 and V2 for 3-7.
  static std::vector<BatchPlan> default_batches();
};

// Replaces ${NAME} in every string value. Throws ConfigError naming an unset
// variable.
json interpolate_env(const json& value);

PipelineConfig parse_pipeline_config(const json& raw, const std::filesystem::path& config_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
json to_json(const PipelineConfig& c);

}  // namespace synthaug::pipeline
