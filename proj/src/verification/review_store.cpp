#include "synthaug/verification/review_store.hpp"

#include <algorithm>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"

namespace synthaug::verification {

using generation::CandidateDecision;
using generation::DecisionMeta;

std::string_view to_string(Verdict v) { return v == Verdict::kAccept ? "accept" : "reject"; }

Verdict parse_verdict(std::string_view s) {
  if (s == "accept") return Verdict::kAccept;
  if (s == "reject") return Verdict::kReject;
  throw ValidationError("verdict must be 'accept' or 'reject', got '" + std::string(s) + "'");
}

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::kQueued:
      return "queued";
    case TaskState::kShown:
      return "shown";
    case TaskState::kDecided:
      return "decided";
  }
  return "unknown";
}

std::string_view to_string(BatchStatus s) {
  switch (s) {
    case BatchStatus::kOpen:
      return "open";
    case BatchStatus::kComplete:
      return "complete";
    case BatchStatus::kAwaitingReview:
      return "awaiting_review";
    case BatchStatus::kIncomplete:
      return "incomplete";
    case BatchStatus::kPaused:
      return "paused";
  }
  return "unknown";
}

BatchStatus parse_batch_status(std::string_view s) {
  for (auto st : {BatchStatus::kOpen, BatchStatus::kComplete, BatchStatus::kAwaitingReview,
                  BatchStatus::kIncomplete, BatchStatus::kPaused}) {
    if (to_string(st) == s) return st;
  }
  throw DataError("unknown batch status '" + std::string(s) + "'");
}

bool BatchProgress::complete() const {
  return std::all_of(per_class.begin(), per_class.end(),
                     [&](const ClassProgress& c) { return c.accepted == info.target_per_class; });
}

json to_json(const BatchInfo& b) {
  return json{{"batch_id", b.batch_id},
              {"prompt_version", b.prompt_version},
              {"prompt_mode", prompts::to_string(b.prompt_mode)},
              {"target_per_class", b.target_per_class},
              {"seed", b.seed}};
}

BatchInfo batch_info_from_json(const json& j) {
  BatchInfo b;
  b.batch_id = j.at("batch_id").get<std::string>();
  b.prompt_version = j.at("prompt_version").get<std::string>();
  b.prompt_mode = prompts::parse_prompt_mode(j.at("prompt_mode").get<std::string>());
  b.target_per_class = j.at("target_per_class").get<int>();
  b.seed = j.value("seed", std::uint64_t{0});
  return b;
}

json to_json(const ReviewTask& t) {
  return json{{"candidate_id", t.candidate_id},
              {"class", synthaug::to_string(t.defect_class)},
              {"batch_id", t.batch_id},
              {"candidate_image", t.candidate_image},
              {"reference_ids", t.reference_ids},
              {"state", to_string(t.state)}};
}

json to_json(const BatchProgress& p) {
  json per_class = json::object();
  for (auto c : kAllClasses) {
    const auto& cp = p.per_class[class_index(c)];
    per_class[std::string(synthaug::to_string(c))] =
        json{{"accepted", cp.accepted}, {"pending", cp.pending}, {"rejected", cp.rejected}};
  }
  return json{{"batch", to_json(p.info)},
              {"per_class", per_class},
              {"accepted", p.accepted},
              {"pending", p.pending},
              {"rejected", p.rejected},
              {"requests", p.requests},
              {"rejection_rate", p.rejection_rate},
              {"status", to_string(p.status)},
              {"diagnostic", p.diagnostic},
              {"complete", p.complete()}};
}

ReviewStore::ReviewStore(std::filesystem::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  state_ = replay_all();
}

std::shared_ptr<const ReviewStore::State> ReviewStore::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return state_;
}

const ReviewStore::BatchState& ReviewStore::batch_or_throw(const State& s,
                                                           const std::string& batch_id) const {
  auto it = s.find(batch_id);
  if (it == s.end()) throw NotFoundError("unknown batch " + batch_id);
  return it->second;
}

void ReviewStore::apply(BatchState& b, const json& event, std::vector<RegenerationTask>* emitted) {
  const std::string type = event.at("type").get<std::string>();
  b.seq = std::max(b.seq, event.value("seq", std::uint64_t{0}));
  if (type == "batch_created") {
    b.info = batch_info_from_json(event.at("batch"));
  } else if (type == "candidate_added") {
    auto c = generation::candidate_from_json(event.at("candidate"));
    if (c.replaces) b.replaced.insert(*c.replaces);
    b.order.push_back(c.candidate_id);
    b.candidates.emplace(c.candidate_id, std::move(c));
  } else if (type == "enqueued") {
    const auto id = event.at("candidate_id").get<std::string>();
    if (b.enqueued.insert(id).second) b.queue.push_back(id);
  } else if (type == "decision") {
    auto& c = b.candidates.at(event.at("candidate_id").get<std::string>());
    c.decision = parse_verdict(event.at("verdict").get<std::string>()) == Verdict::kAccept
                     ? CandidateDecision::kAccepted
                     : CandidateDecision::kRejected;
    DecisionMeta meta{event.at("annotator").get<std::string>(),
                      event.at("timestamp").get<std::string>(), std::nullopt};
    if (event.contains("reason")) meta.reason = event["reason"].get<std::string>();
    c.decision_meta = meta;
  } else if (type == "regeneration_requested") {
    RegenerationTask t{b.info.batch_id, parse_defect_class(event.at("class").get<std::string>()),
                       event.at("candidate_id").get<std::string>()};
    b.regenerations.push_back(t);
    if (emitted) emitted->push_back(t);
  } else if (type == "batch_status") {
    b.status = parse_batch_status(event.at("status").get<std::string>());
    b.diagnostic = event.value("diagnostic", std::string());
  } else {
    throw DataError("unknown event type '" + type + "'");
  }
}

BatchProgress ReviewStore::progress_of(const BatchState& b) {
  BatchProgress p;
  p.info = b.info;
  p.requests = static_cast<int>(b.order.size());
  for (const auto& id : b.queue) {
    const auto& c = b.candidates.at(id);
    auto& cp = p.per_class[class_index(c.defect_class)];
    switch (c.decision) {
      case CandidateDecision::kAccepted:
        ++cp.accepted;
        ++p.accepted;
        break;
      case CandidateDecision::kRejected:
        ++cp.rejected;
        ++p.rejected;
        break;
      case CandidateDecision::kPending:
        ++cp.pending;
        ++p.pending;
        break;
    }
  }
  const int target = b.info.target_total();
  p.rejection_rate = target > 0 ? static_cast<double>(p.rejected) / target : 0.0;
  p.status = b.status;
  p.diagnostic = b.diagnostic;
  return p;
}

void ReviewStore::write_derived(const BatchState& b) const {
  const auto dir = batch_dir(b.info.batch_id);
  std::vector<json> rows;
  rows.reserve(b.order.size());
  for (const auto& id : b.order) rows.push_back(generation::to_json(b.candidates.at(id)));
  write_jsonl(dir / "candidates.jsonl", rows);
  write_json_file(dir / "batch.json", to_json(progress_of(b)));
}

void ReviewStore::commit(const std::string& batch_id, json event) {
  auto next = std::make_shared<State>(*snapshot());
  BatchState& b = (*next)[batch_id];
  event["seq"] = b.seq + 1;
  append_jsonl(batch_dir(batch_id) / "events.jsonl", event);

  std::vector<RegenerationTask> emitted;
  apply(b, event, &emitted);
  write_derived(b);
  {
    std::lock_guard lock(snapshot_mu_);
    state_ = std::move(next);
  }
  if (listener_) {
    for (const auto& t : emitted) listener_(t);
  }
}

void ReviewStore::create_batch(const BatchInfo& info) {
  if (info.batch_id.empty() || info.batch_id.find('/') != std::string::npos) {
    throw ValidationError("invalid batch id '" + info.batch_id + "'");
  }
  if (info.target_per_class < 1) throw ValidationError("target_per_class must be >= 1");
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  if (auto it = s->find(info.batch_id); it != s->end()) {
    if (it->second.info == info) return;
    throw ConflictError("batch " + info.batch_id + " already exists with a different configuration");
  }
  fs::create_directories(batch_dir(info.batch_id) / "images");
  commit(info.batch_id, json{{"type", "batch_created"}, {"batch", to_json(info)}});
}

bool ReviewStore::has_batch(const std::string& batch_id) const {
  return snapshot()->contains(batch_id);
}

void ReviewStore::add_candidate(const SyntheticCandidate& candidate) {
  generation::check_invariants(candidate);
  if (candidate.decision != CandidateDecision::kPending) {
    throw StateError("candidate " + candidate.candidate_id + " must be pending when added");
  }
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  const BatchState& b = batch_or_throw(*s, candidate.batch_id);
  if (b.candidates.contains(candidate.candidate_id)) {
    throw ConflictError("candidate " + candidate.candidate_id + " already exists");
  }
  if (candidate.replaces) {
    auto it = b.candidates.find(*candidate.replaces);
    if (it == b.candidates.end() || it->second.decision != CandidateDecision::kRejected) {
      throw StateError("candidate " + candidate.candidate_id +
                       " replaces a candidate that is not rejected: " + *candidate.replaces);
    }
    if (b.replaced.contains(*candidate.replaces)) {
      throw ConflictError("rejected candidate " + *candidate.replaces + " was already regenerated");
    }
  }
  commit(candidate.batch_id,
         json{{"type", "candidate_added"}, {"candidate", generation::to_json(candidate)}});
}

namespace {
ReviewTask task_for(const SyntheticCandidate& c, TaskState state) {
  ReviewTask t;
  t.candidate_id = c.candidate_id;
  t.defect_class = c.defect_class;
  t.batch_id = c.batch_id;
  t.candidate_image = c.batch_id + "/" + c.image_path;
  t.reference_ids = c.reference_ids;
  t.state = state;
  return t;
}

const SyntheticCandidate* find_in(const std::map<std::string, SyntheticCandidate>& m,
                                  const std::string& id) {
  auto it = m.find(id);
  return it == m.end() ? nullptr : &it->second;
}
}  // namespace

ReviewTask ReviewStore::enqueue(const std::string& candidate_id) {
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  for (const auto& [batch_id, b] : *s) {
    const SyntheticCandidate* c = find_in(b.candidates, candidate_id);
    if (c == nullptr) continue;
    if (c->decision != CandidateDecision::kPending) {
      throw StateError("candidate " + candidate_id + " is already decided");
    }
    if (!b.enqueued.contains(candidate_id)) {
      commit(batch_id, json{{"type", "enqueued"}, {"candidate_id", candidate_id}});
    }
    return task_for(*c, TaskState::kQueued);
  }
  throw NotFoundError("unknown candidate " + candidate_id);
}

SyntheticCandidate ReviewStore::record_decision(Decision decision) {
  if (decision.annotator.empty()) throw ValidationError("decision requires an annotator");
  if (decision.timestamp.empty()) decision.timestamp = generation::utc_timestamp_now();
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  for (const auto& [batch_id, b] : *s) {
    const SyntheticCandidate* c = find_in(b.candidates, decision.candidate_id);
    if (c == nullptr) continue;
    if (c->decision != CandidateDecision::kPending) {
      throw ConflictError("candidate " + decision.candidate_id + " already has a decision (" +
                          std::string(generation::to_string(c->decision)) + ")");
    }
    if (!b.enqueued.contains(decision.candidate_id)) {
      throw StateError("candidate " + decision.candidate_id + " has no review task");
    }
    json event{{"type", "decision"},
               {"candidate_id", decision.candidate_id},
               {"verdict", to_string(decision.verdict)},
               {"annotator", decision.annotator},
               {"timestamp", decision.timestamp}};
    if (decision.reason) event["reason"] = *decision.reason;
    const DefectClass cls = c->defect_class;
    commit(batch_id, event);
    if (decision.verdict == Verdict::kReject) {
      commit(batch_id, json{{"type", "regeneration_requested"},
                            {"candidate_id", decision.candidate_id},
                            {"class", synthaug::to_string(cls)}});
    }
    {
      std::lock_guard shown_lock(shown_mu_);
      shown_.erase(decision.candidate_id);
    }
    return snapshot()->at(batch_id).candidates.at(decision.candidate_id);
  }
  throw NotFoundError("unknown candidate " + decision.candidate_id);
}

std::optional<ReviewTask> ReviewStore::next_task(const std::string& batch_id) {
  const auto s = snapshot();
  const BatchState& b = batch_or_throw(*s, batch_id);
  for (const auto& id : b.queue) {
    const auto& c = b.candidates.at(id);
    if (c.decision != CandidateDecision::kPending) continue;
    std::lock_guard lock(shown_mu_);
    shown_.insert(id);
    return task_for(c, TaskState::kShown);
  }
  return std::nullopt;
}

BatchProgress ReviewStore::batch_progress(const std::string& batch_id) const {
  const auto s = snapshot();
  return progress_of(batch_or_throw(*s, batch_id));
}

std::vector<BatchProgress> ReviewStore::list_batches() const {
  const auto s = snapshot();
  std::vector<BatchProgress> out;
  for (const auto& [_, b] : *s) out.push_back(progress_of(b));
  return out;
}

std::vector<SyntheticCandidate> ReviewStore::candidates(const std::string& batch_id) const {
  const auto s = snapshot();
  const BatchState& b = batch_or_throw(*s, batch_id);
  std::vector<SyntheticCandidate> out;
  out.reserve(b.order.size());
  for (const auto& id : b.order) out.push_back(b.candidates.at(id));
  return out;
}

std::optional<SyntheticCandidate> ReviewStore::find_candidate(const std::string& candidate_id) const {
  const auto s = snapshot();
  for (const auto& [_, b] : *s) {
    if (const auto* c = find_in(b.candidates, candidate_id)) return *c;
  }
  return std::nullopt;
}

std::vector<RegenerationTask> ReviewStore::open_regeneration_tasks(const std::string& batch_id) const {
  const auto s = snapshot();
  const BatchState& b = batch_or_throw(*s, batch_id);
  std::vector<RegenerationTask> out;
  for (const auto& t : b.regenerations) {
    if (!b.replaced.contains(t.rejected_candidate_id)) out.push_back(t);
  }
  return out;
}

std::vector<RegenerationTask> ReviewStore::emitted_regeneration_tasks(const std::string& batch_id) const {
  const auto s = snapshot();
  return batch_or_throw(*s, batch_id).regenerations;
}

void ReviewStore::set_batch_status(const std::string& batch_id, BatchStatus status,
                                   const std::string& diagnostic) {
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  const BatchState& b = batch_or_throw(*s, batch_id);
  if (b.status == status && b.diagnostic == diagnostic) return;
  commit(batch_id, json{{"type", "batch_status"},
                        {"status", to_string(status)},
                        {"diagnostic", diagnostic}});
}

void ReviewStore::on_regeneration(std::function<void(const RegenerationTask&)> listener) {
  std::lock_guard lock(write_mu_);
  listener_ = std::move(listener);
}

std::shared_ptr<const ReviewStore::State> ReviewStore::replay_all() const {
  auto state = std::make_shared<State>();
  if (!fs::exists(root_)) return state;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    BatchState b;
    for (const auto& event : read_jsonl(dir / "events.jsonl")) apply(b, event, nullptr);
    if (b.info.batch_id.empty()) throw DataError("event log without batch_created: " + dir.string());
    state->emplace(b.info.batch_id, std::move(b));
  }
  return state;
}

void ReviewStore::reload() {
  std::lock_guard lock(write_mu_);
  auto fresh = replay_all();
  std::lock_guard snap_lock(snapshot_mu_);
  state_ = std::move(fresh);
}

}  // namespace synthaug::verification
