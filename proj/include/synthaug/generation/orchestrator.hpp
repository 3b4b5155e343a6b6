#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synthaug/common/random.hpp"
#include "synthaug/dataset/curation.hpp"
#include "synthaug/generation/backend.hpp"
#include "synthaug/prompts/registry.hpp"
#include "synthaug/verification/review_store.hpp"

namespace synthaug::generation {

// Real images that may condition generation, per class.
struct ReferencePool {
  std::map<DefectClass, std::vector<std::string>> ids;
  std::map<std::string, std::filesystem::path> paths;

  // Uses each record's crop when present, else its source image.
  static ReferencePool from_records(std::span<const dataset::ImageRecord> records);
  std::size_t size(DefectClass c) const;
  ReferenceImage image(const std::string& id) const;
};

// Draws references for one class of one batch. Images are consumed without
// replacement from a seeded permutation of the class pool; when fewer than the
// requested count remain the pool is reshuffled.
class ReferenceSampler {
 public:
  ReferenceSampler(const ReferencePool& pool, DefectClass c, std::uint64_t seed);

  std::pair<std::string, std::string> next_pair();
  std::string next_single();
  std::vector<std::string> next(int count);

 private:
  void refill();

  std::vector<std::string> ids_;
  std::vector<std::string> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

// Throws ConfigError when the pool holds fewer than 2 images of the class.
std::pair<std::string, std::string> sample_reference_pair(const ReferencePool& pool, DefectClass c,
                                                          Rng& rng);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct GenerationJob {
  std::string batch_id;
  std::uint64_t ordinal = 0;
  DefectClass defect_class = DefectClass::kShell;
  std::vector<std::string> reference_ids;
  std::optional<std::string> replaces;
};

// Calls the backend (with retries) and writes the image under
// `batch_dir/images/`. Returns a pending candidate; throws BackendError once
// retries are exhausted.
SyntheticCandidate generate_candidate(GeneratorBackend& backend, const ReferencePool& pool,
                                      const prompts::PromptTemplate& prompt, const GenerationJob& job,
                                      const std::filesystem::path& batch_dir,
                                      std::uint64_t batch_seed, const RetryPolicy& retry);

// Supplies verdicts for freshly generated candidates. Returning nullopt
// leaves the task queued for a human reviewer.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual std::optional<verification::Decision> review(const verification::ReviewTask& task,
                                                       const SyntheticCandidate& candidate) = 0;
};

class AutoAcceptVerifier final : public Verifier {
 public:
  std::optional<verification::Decision> review(const verification::ReviewTask& task,
                                               const SyntheticCandidate&) override {
    return verification::Decision{task.candidate_id, verification::Verdict::kAccept, "auto-accept",
                                  "", std::nullopt};
  }
};

class DeferredVerifier final : public Verifier {
 public:
  std::optional<verification::Decision> review(const verification::ReviewTask&,
                                               const SyntheticCandidate&) override {
    return std::nullopt;
  }
};

struct BatchConfig {
  std::string batch_id;
  std::string prompt_version = "V2";
  prompts::PromptMode prompt_mode = prompts::PromptMode::kDualRef;
  int target_per_class = 52;
  int max_parallel = 4;
  // Request budget = ceil(budget_factor x total target).
  double budget_factor = 3.0;
  std::uint64_t seed = 0;
  RetryPolicy retry;
};

struct Batch {
  std::string batch_id;
  std::string prompt_version;
  int target_per_class = 0;
  std::map<DefectClass, std::vector<std::string>> accepted;
  int request_count = 0;
  int rejected_count = 0;
  int pending_count = 0;
  verification::BatchStatus status = verification::BatchStatus::kOpen;
  std::string diagnostic;

  bool complete() const;
};

// Generates, verifies and regenerates until every class has
// target_per_class accepted candidates. Safe to call again on the same batch:
// existing candidates are kept and only missing work is issued.
Batch run_batch(const BatchConfig& config, GeneratorBackend& backend, const ReferencePool& pool,
                const prompts::PromptRegistry& registry, verification::ReviewStore& store,
                Verifier& verifier);

Batch batch_from_store(const verification::ReviewStore& store, const std::string& batch_id);

}  // namespace synthaug::generation
