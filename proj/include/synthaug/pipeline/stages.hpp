#pragma once

// Pipeline stages behind the CLI subcommands. Each stage reads the artifacts
// of earlier stages from the run directory, writes its own, and returns a JSON
// summary. Missing inputs raise MissingArtifactError naming the subcommand
// that produces them.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "synthaug/classifier/harness.hpp"
#include "synthaug/dataset/curation.hpp"
#include "synthaug/embedding/backend.hpp"
#include "synthaug/generation/backend.hpp"
#include "synthaug/pipeline/config.hpp"

namespace synthaug::pipeline {

// Artifact locations inside one run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path records() const { return root / "data" / "records.jsonl"; }
  std::filesystem::path groups() const { return root / "data" / "groups.json"; }
  std::filesystem::path curation_log() const { return root / "data" / "curation_log.json"; }
  std::filesystem::path crops_dir() const { return root / "data" / "crops"; }
  std::filesystem::path splits() const { return root / "splits.json"; }
  std::filesystem::path fractions() const { return root / "fractions.json"; }
  std::filesystem::path manifests_dir() const { return root / "manifests"; }
  std::filesystem::path real_manifest(double fraction) const;
  std::filesystem::path split_manifest(dataset::Split s) const;
  std::filesystem::path selected_manifest(int n_per_class) const;
  std::filesystem::path prompts_dir() const { return root / "prompts"; }
  std::filesystem::path review_root() const { return root / "review"; }
  std::filesystem::path generation_dir() const { return root / "generation"; }
  std::filesystem::path embeddings_root() const { return root / "embeddings"; }
  std::filesystem::path embedding_index() const { return root / "embeddings" / "index.json"; }
  std::filesystem::path reports_dir() const { return root / "reports"; }
  std::filesystem::path checkpoints_dir() const { return root / "checkpoints"; }
};

// "10" for 0.1, "12.5" for 0.125.
std::string fraction_tag(double fraction);
// "10%"
std::string format_fraction_plain(double fraction);

// `<runs_root>/<timestamp>-<tag>`; points `<runs_root>/latest` at it.
std::filesystem::path create_run_dir(const PipelineConfig& config, const std::string& timestamp);
// The explicit directory, else `<runs_root>/latest`.
std::filesystem::path resolve_run_dir(const PipelineConfig& config,
                                      const std::optional<std::filesystem::path>& explicit_dir);
std::string run_timestamp_now();

struct StageContext {
  PipelineConfig config;
  RunPaths paths;
  bool dry_run = false;
  std::ostream* log = nullptr;
};

json stage_ingest(const StageContext& ctx);
json stage_split(const StageContext& ctx);

struct GenerateOptions {
  std::optional<std::string> batch_id;
  bool auto_accept = false;
  std::optional<std::string> backend;
};

json stage_generate(const StageContext& ctx, const GenerateOptions& opts);
json stage_embed(const StageContext& ctx);
json stage_select(const StageContext& ctx, std::optional<int> n_per_class);

enum class TrainMode { kSupervised, kZeroShot, kLinearProbe };

struct TrainRequest {
  std::optional<double> fraction;
  // Embedding-selected synthetic manifest to mix in.
  std::optional<int> selected_n_per_class;
  // Manually chosen batches whose accepted candidates are mixed in.
  std::vector<std::string> manual_batches;
  bool randaugment = false;
  TrainMode mode = TrainMode::kSupervised;
};

std::string train_label(const TrainRequest& r, double fraction);
json stage_train(const StageContext& ctx, const TrainRequest& request);

// Real-only baseline, every selected manifest, and every configured manual
// batch combination, each over all seeds. Writes reports/comparison.json.
json stage_compare(const StageContext& ctx);

json stage_sweep(const StageContext& ctx);
json stage_report(const StageContext& ctx);

// Helpers shared with the CLI.
std::vector<dataset::ImageRecord> load_records(const RunPaths& paths);
dataset::SplitAssignment load_splits(const RunPaths& paths);
dataset::FractionPlan load_fraction_plan(const RunPaths& paths);
std::vector<dataset::ImageRecord> reference_records(const StageContext& ctx);
std::unique_ptr<generation::GeneratorBackend> make_generator(const GeneratorConfig& config,
                                                              const std::string& backend);
std::unique_ptr<embedding::EmbeddingBackend> make_embedding_backend(const PipelineConfig& config);

}  // namespace synthaug::pipeline
