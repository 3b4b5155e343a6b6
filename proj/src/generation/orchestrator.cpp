#include "synthaug/generation/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"

namespace synthaug::generation {

using verification::BatchStatus;
using verification::ReviewStore;

ReferencePool ReferencePool::from_records(std::span<const dataset::ImageRecord> records) {
  ReferencePool pool;
  for (const auto& r : records) {
    pool.ids[r.defect_class()].push_back(r.image_id);
    pool.paths[r.image_id] = r.crop_path.empty() ? r.source_path : r.crop_path;
  }
  for (auto& [_, ids] : pool.ids) std::sort(ids.begin(), ids.end());
  return pool;
}

std::size_t ReferencePool::size(DefectClass c) const {
  auto it = ids.find(c);
  return it == ids.end() ? 0 : it->second.size();
}

ReferenceImage ReferencePool::image(const std::string& id) const {
  auto it = paths.find(id);
  if (it == paths.end()) throw NotFoundError("reference image " + id + " is not in the pool");
  return ReferenceImage{id, it->second};
}

ReferenceSampler::ReferenceSampler(const ReferencePool& pool, DefectClass c, std::uint64_t seed)
    : rng_(mix_seed(seed, std::string("reference_sampler/") + std::string(to_string(c)))) {
  auto it = pool.ids.find(c);
  if (it != pool.ids.end()) ids_ = it->second;
  std::sort(ids_.begin(), ids_.end());
  if (ids_.size() < 2) {
    throw ConfigError("reference pool for class " + std::string(to_string(c)) + " has " +
                      std::to_string(ids_.size()) + " images; at least 2 are required");
  }
  refill();
}

void ReferenceSampler::refill() {
  order_ = ids_;
  shuffle(std::span<std::string>(order_), rng_);
  cursor_ = 0;
}

std::vector<std::string> ReferenceSampler::next(int count) {
  if (count < 1 || static_cast<std::size_t>(count) > ids_.size()) {
    throw ConfigError("cannot draw " + std::to_string(count) + " distinct references from a pool of " +
                      std::to_string(ids_.size()));
  }
  if (order_.size() - cursor_ < static_cast<std::size_t>(count)) refill();
  std::vector<std::string> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + count));
  cursor_ += static_cast<std::size_t>(count);
  return out;
}

std::pair<std::string, std::string> ReferenceSampler::next_pair() {
  auto v = next(2);
  return {v[0], v[1]};
}

std::string ReferenceSampler::next_single() { return next(1)[0]; }

std::pair<std::string, std::string> sample_reference_pair(const ReferencePool& pool, DefectClass c,
                                                          Rng& rng) {
  ReferenceSampler sampler(pool, c, rng());
  return sampler.next_pair();
}

SyntheticCandidate generate_candidate(GeneratorBackend& backend, const ReferencePool& pool,
                                      const prompts::PromptTemplate& prompt, const GenerationJob& job,
                                      const std::filesystem::path& batch_dir,
                                      std::uint64_t batch_seed, const RetryPolicy& retry) {
  GenerationRequest request;
  request.defect_class = job.defect_class;
  request.prompt_text = prompt.text;
  for (const auto& id : job.reference_ids) request.references.push_back(pool.image(id));
  request.seed = mix_seed(batch_seed, job.batch_id + "#" + std::to_string(job.ordinal));

  GenerationResult result;
  auto delay = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      result = backend.generate(request);
      break;
    } catch (const BackendError& e) {
      if (attempt >= retry.max_retries) {
        throw BackendError("generation of " + job.batch_id + "#" + std::to_string(job.ordinal) +
                           " failed after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      if (retry.sleep) {
        retry.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) * retry.backoff_factor));
    }
  }

  SyntheticCandidate c;
  c.candidate_id = candidate_id_for(job.batch_id, job.ordinal);
  c.defect_class = job.defect_class;
  c.reference_ids = job.reference_ids;
  c.prompt_version = prompt.version;
  c.prompt_mode = prompt.mode;
  c.batch_id = job.batch_id;
  c.ordinal = job.ordinal;
  c.image_path = "images/" + c.candidate_id + ".png";
  c.token_usage = result.usage;
  c.replaces = job.replaces;
  write_text_file(batch_dir / c.image_path,
                  std::string(result.image_png.begin(), result.image_png.end()));
  return c;
}

bool Batch::complete() const {
  for (auto c : kAllClasses) {
    auto it = accepted.find(c);
    const std::size_t n = it == accepted.end() ? 0 : it->second.size();
    if (n != static_cast<std::size_t>(target_per_class)) return false;
  }
  return true;
}

Batch batch_from_store(const ReviewStore& store, const std::string& batch_id) {
  const auto progress = store.batch_progress(batch_id);
  Batch b;
  b.batch_id = batch_id;
  b.prompt_version = progress.info.prompt_version;
  b.target_per_class = progress.info.target_per_class;
  for (auto c : kAllClasses) b.accepted[c];
  for (const auto& c : store.candidates(batch_id)) {
    if (c.decision == CandidateDecision::kAccepted) b.accepted[c.defect_class].push_back(c.candidate_id);
  }
  b.request_count = progress.requests;
  b.rejected_count = progress.rejected;
  b.pending_count = progress.pending;
  b.status = progress.status;
  b.diagnostic = progress.diagnostic;
  return b;
}

namespace {

void review_pending(ReviewStore& store, const std::string& batch_id, Verifier& verifier) {
  for (const auto& c : store.candidates(batch_id)) {
    if (c.decision != CandidateDecision::kPending) continue;
    const auto task = store.enqueue(c.candidate_id);
    if (auto d = verifier.review(task, c)) {
      d->candidate_id = c.candidate_id;
      store.record_decision(*d);
    }
  }
}

}  // namespace

Batch run_batch(const BatchConfig& config, GeneratorBackend& backend, const ReferencePool& pool,
                const prompts::PromptRegistry& registry, ReviewStore& store, Verifier& verifier) {
  if (config.max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
  const int refs_per_request = prompts::reference_count(config.prompt_mode);
  if (refs_per_request > backend.capabilities().max_references) {
    throw ConfigError("backend " + backend.name() + " accepts at most " +
                      std::to_string(backend.capabilities().max_references) + " references");
  }

  std::map<DefectClass, prompts::PromptTemplate> prompt_for;
  std::map<DefectClass, ReferenceSampler> samplers;
  for (auto c : kAllClasses) {
    prompt_for.emplace(c, registry.get(c, config.prompt_version, config.prompt_mode));
    samplers.emplace(c, ReferenceSampler(pool, c, mix_seed(config.seed, config.batch_id)));
  }

  verification::BatchInfo info{config.batch_id, config.prompt_version, config.prompt_mode,
                               config.target_per_class, config.seed};
  store.create_batch(info);
  const auto batch_dir = store.batch_dir(config.batch_id);

  // Replay reference draws so a resumed batch continues the same sequence.
  std::uint64_t next_ordinal = 0;
  for (const auto& c : store.candidates(config.batch_id)) {
    samplers.at(c.defect_class).next(refs_per_request);
    next_ordinal = std::max(next_ordinal, c.ordinal + 1);
  }
  review_pending(store, config.batch_id, verifier);

  const int budget = static_cast<int>(std::ceil(config.budget_factor * info.target_total() - 1e-9));

  for (;;) {
    const auto existing = store.candidates(config.batch_id);
    std::map<DefectClass, int> first_pass;
    for (const auto& c : existing) {
      if (!c.replaces) ++first_pass[c.defect_class];
    }

    std::vector<GenerationJob> jobs;
    for (auto c : kAllClasses) {
      for (int i = first_pass[c]; i < config.target_per_class; ++i) {
        jobs.push_back(GenerationJob{config.batch_id, 0, c, {}, std::nullopt});
      }
    }
    for (const auto& t : store.open_regeneration_tasks(config.batch_id)) {
      jobs.push_back(GenerationJob{config.batch_id, 0, t.defect_class, {}, t.rejected_candidate_id});
    }

    if (jobs.empty()) {
      const auto progress = store.batch_progress(config.batch_id);
      if (progress.complete()) {
        store.set_batch_status(config.batch_id, BatchStatus::kComplete, "");
      } else if (progress.pending > 0) {
        store.set_batch_status(config.batch_id, BatchStatus::kAwaitingReview,
                               std::to_string(progress.pending) + " candidates await review");
      } else {
        store.set_batch_status(config.batch_id, BatchStatus::kIncomplete,
                               "no work left but batch is not complete");
      }
      return batch_from_store(store, config.batch_id);
    }

    const int used = static_cast<int>(existing.size());
    if (used >= budget) {
      store.set_batch_status(config.batch_id, BatchStatus::kIncomplete,
                             "generation budget of " + std::to_string(budget) +
                                 " requests exhausted with " + std::to_string(jobs.size()) +
                                 " requests outstanding");
      return batch_from_store(store, config.batch_id);
    }
    const std::size_t round = std::min<std::size_t>(
        {jobs.size(), static_cast<std::size_t>(config.max_parallel), static_cast<std::size_t>(budget - used)});
    jobs.resize(round);
    for (auto& job : jobs) {
      job.ordinal = next_ordinal++;
      job.reference_ids = samplers.at(job.defect_class).next(refs_per_request);
    }

    std::vector<std::future<SyntheticCandidate>> inflight;
    inflight.reserve(jobs.size());
    for (const auto& job : jobs) {
      inflight.push_back(std::async(std::launch::async, [&, job] {
        return generate_candidate(backend, pool, prompt_for.at(job.defect_class), job, batch_dir,
                                  config.seed, config.retry);
      }));
    }

    std::string failure;
    for (auto& f : inflight) {
      try {
        SyntheticCandidate c = f.get();
        store.add_candidate(c);
        const auto task = store.enqueue(c.candidate_id);
        if (auto d = verifier.review(task, c)) {
          d->candidate_id = c.candidate_id;
          store.record_decision(*d);
        }
      } catch (const BackendError& e) {
        if (failure.empty()) failure = e.what();
      }
    }
    if (!failure.empty()) {
      store.set_batch_status(config.batch_id, BatchStatus::kPaused, failure);
      return batch_from_store(store, config.batch_id);
    }
  }
}

}  // namespace synthaug::generation
