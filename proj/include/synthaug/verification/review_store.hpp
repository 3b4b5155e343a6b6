#pragma once

// Event-sourced persistence for the accept/reject workflow.
//
// Layout per batch under the store root:
//   <root>/<batch_id>/events.jsonl      append-only log, the source of truth
//   <root>/<batch_id>/candidates.jsonl  derived snapshot of candidate states
//   <root>/<batch_id>/batch.json        derived batch summary and progress
//   <root>/<batch_id>/images/           candidate images
//
// Mutations are serialized through one writer lock and appended (and flushed)
// to the log before the in-memory state changes. Readers work on an immutable
// snapshot that is swapped after each mutation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthaug/generation/candidate.hpp"

namespace synthaug::verification {

using ::synthaug::to_json;

using generation::SyntheticCandidate;

enum class Verdict { kAccept, kReject };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

enum class TaskState { kQueued, kShown, kDecided };
std::string_view to_string(TaskState s);

enum class BatchStatus { kOpen, kComplete, kAwaitingReview, kIncomplete, kPaused };
std::string_view to_string(BatchStatus s);
BatchStatus parse_batch_status(std::string_view s);

struct BatchInfo {
  std::string batch_id;
  std::string prompt_version;
  prompts::PromptMode prompt_mode = prompts::PromptMode::kDualRef;
  int target_per_class = 52;
  std::uint64_t seed = 0;

  int target_total() const { return target_per_class * static_cast<int>(kNumClasses); }
  friend bool operator==(const BatchInfo&, const BatchInfo&) = default;
};

struct ReviewTask {
  std::string candidate_id;
  DefectClass defect_class = DefectClass::kShell;
  std::string batch_id;
  // Relative to the store root.
  std::string candidate_image;
  std::vector<std::string> reference_ids;
  TaskState state = TaskState::kQueued;
};

struct Decision {
  std::string candidate_id;
  Verdict verdict = Verdict::kAccept;
  std::string annotator;
  // Filled with the current UTC time when empty.
  std::string timestamp;
  std::optional<std::string> reason;
};

// Emitted once per rejection; consumed when a candidate naming it in
// `replaces` is added.
struct RegenerationTask {
  std::string batch_id;
  DefectClass defect_class = DefectClass::kShell;
  std::string rejected_candidate_id;
};

struct ClassProgress {
  int accepted = 0;
  int pending = 0;
  int rejected = 0;
};

struct BatchProgress {
  BatchInfo info;
  std::array<ClassProgress, kNumClasses> per_class{};
  int accepted = 0;
  int pending = 0;
  int rejected = 0;
  // Candidates added to the batch, i.e. generation requests that produced an image.
  int requests = 0;
  // rejected / (target_per_class x number of classes)
  double rejection_rate = 0.0;
  BatchStatus status = BatchStatus::kOpen;
  std::string diagnostic;

  bool complete() const;
};

json to_json(const BatchInfo& b);
BatchInfo batch_info_from_json(const json& j);
json to_json(const ReviewTask& t);
json to_json(const BatchProgress& p);

class ReviewStore {
 public:
  // Replays every batch log found under `root`.
  explicit ReviewStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path batch_dir(const std::string& batch_id) const { return root_ / batch_id; }

  // Idempotent for an identical BatchInfo; ConflictError if it differs.
  void create_batch(const BatchInfo& info);
  bool has_batch(const std::string& batch_id) const;

  // Persists a pending candidate. ConflictError on a duplicate id.
  void add_candidate(const SyntheticCandidate& candidate);

  // Adds the candidate to its batch's FIFO review queue. Enqueuing twice is a
  // no-op; enqueuing a decided candidate throws StateError.
  ReviewTask enqueue(const std::string& candidate_id);

  // Write-once. ConflictError on a second decision, NotFoundError for an
  // unknown candidate, StateError if the candidate was never enqueued.
  SyntheticCandidate record_decision(Decision decision);

  // Oldest undecided task of the batch, marked shown; nullopt when drained.
  std::optional<ReviewTask> next_task(const std::string& batch_id);

  BatchProgress batch_progress(const std::string& batch_id) const;
  std::vector<BatchProgress> list_batches() const;
  std::vector<SyntheticCandidate> candidates(const std::string& batch_id) const;
  std::optional<SyntheticCandidate> find_candidate(const std::string& candidate_id) const;
  std::vector<RegenerationTask> open_regeneration_tasks(const std::string& batch_id) const;
  // Every regeneration task ever emitted for the batch, in emission order.
  std::vector<RegenerationTask> emitted_regeneration_tasks(const std::string& batch_id) const;

  void set_batch_status(const std::string& batch_id, BatchStatus status, const std::string& diagnostic);

  // Called under the writer lock for each emitted regeneration task.
  void on_regeneration(std::function<void(const RegenerationTask&)> listener);

  // Re-reads logs from disk, picking up writes by other processes.
  void reload();

 private:
  struct BatchState {
    BatchInfo info;
    std::vector<std::string> order;
    std::map<std::string, SyntheticCandidate> candidates;
    std::vector<std::string> queue;
    std::set<std::string> enqueued;
    std::set<std::string> replaced;
    std::vector<RegenerationTask> regenerations;
    BatchStatus status = BatchStatus::kOpen;
    std::string diagnostic;
    std::uint64_t seq = 0;
  };
  using State = std::map<std::string, BatchState>;

  std::shared_ptr<const State> snapshot() const;
  const BatchState& batch_or_throw(const State& s, const std::string& batch_id) const;
  // Appends to the log, applies to a copy of the state, persists derived
  // files, and publishes the new snapshot. Caller holds write_mu_.
  void commit(const std::string& batch_id, json event);
  static void apply(BatchState& b, const json& event,
                    std::vector<RegenerationTask>* emitted);
  void write_derived(const BatchState& b) const;
  static BatchProgress progress_of(const BatchState& b);
  std::shared_ptr<const State> replay_all() const;

  std::filesystem::path root_;
  std::mutex write_mu_;
  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const State> state_;
  std::mutex shown_mu_;
  std::set<std::string> shown_;
  std::function<void(const RegenerationTask&)> listener_;
};

}  // namespace synthaug::verification
