#include "synthaug/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/common/random.hpp"
#include "synthaug/embedding/filter.hpp"
#include "synthaug/generation/orchestrator.hpp"
#include "synthaug/verification/review_store.hpp"

namespace synthaug::pipeline {

namespace {

using dataset::ImageRecord;
using dataset::Split;

void note(const StageContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << '\n';
}

void require(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw MissingArtifactError(path.string() + " not found; run `synthaug " + std::string(producer) +
                               "` first");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<double> plan_fractions(const PipelineConfig& c) {
  std::vector<double> out = c.fractions;
  out.push_back(c.reference_fraction);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
            out.end());
  return out;
}

std::map<DefectClass, int> class_counts(std::span<const ImageRecord> records) {
  std::map<DefectClass, int> out;
  for (auto c : kAllClasses) out[c] = 0;
  for (const auto& r : records) ++out[r.defect_class()];
  return out;
}

json counts_json(const std::map<DefectClass, int>& counts) {
  json j = json::object();
  for (const auto& [c, n] : counts) j[std::string(to_string(c))] = n;
  return j;
}

std::vector<ManifestItem> load_eval(const RunPaths& paths, Split s) {
  const auto path = paths.split_manifest(s);
  require(path, "split");
  auto items = read_manifest(path).items;
  return items;
}

TrainingManifest load_real(const StageContext& ctx, double fraction) {
  const auto path = ctx.paths.real_manifest(fraction);
  if (!fs::exists(path)) {
    require(ctx.paths.fractions(), "split");
    throw ConfigError("fraction " + format_fraction_plain(fraction) +
                      " is not part of the split plan; add it to `fractions` and rerun `synthaug split`");
  }
  return read_manifest(path);
}

verification::ReviewStore open_store(const RunPaths& paths) {
  require(paths.review_root(), "generate");
  return verification::ReviewStore(paths.review_root());
}

struct SyntheticEntry {
  std::string candidate_id;
  std::string batch_id;
  DefectClass defect_class = DefectClass::kShell;
  std::string prompt_version;
  prompts::PromptMode prompt_mode = prompts::PromptMode::kDualRef;
  std::vector<std::string> reference_ids;
  std::string image_path;  // absolute
};

std::vector<SyntheticEntry> accepted_candidates(const verification::ReviewStore& store,
                                                std::span<const std::string> only_batches = {}) {
  std::vector<SyntheticEntry> out;
  for (const auto& progress : store.list_batches()) {
    const auto& id = progress.info.batch_id;
    if (!only_batches.empty() && std::find(only_batches.begin(), only_batches.end(), id) == only_batches.end()) {
      continue;
    }
    for (const auto& c : store.candidates(id)) {
      if (c.decision != generation::CandidateDecision::kAccepted) continue;
      out.push_back({c.candidate_id, id, c.defect_class, c.prompt_version, c.prompt_mode, c.reference_ids,
                     fs::absolute(store.batch_dir(id) / c.image_path).string()});
    }
  }
  return out;
}

ManifestItem synthetic_item(const SyntheticEntry& e) {
  ManifestItem item;
  item.image_id = e.candidate_id;
  item.image_ref = e.image_path;
  item.label_vector = one_hot(e.defect_class);
  item.source = Source::kSynthetic;
  item.transform_policy = std::string(kPolicySyntheticTrain);
  return item;
}

SyntheticEntry synthetic_entry_from_json(const json& j) {
  SyntheticEntry e;
  e.candidate_id = j.at("candidate_id").get<std::string>();
  e.batch_id = j.at("batch_id").get<std::string>();
  e.defect_class = parse_defect_class(j.at("defect_class").get<std::string>());
  e.prompt_version = j.at("prompt_version").get<std::string>();
  e.prompt_mode = prompts::parse_prompt_mode(j.at("prompt_mode").get<std::string>());
  e.reference_ids = j.at("reference_ids").get<std::vector<std::string>>();
  e.image_path = j.at("image_path").get<std::string>();
  return e;
}

json to_json(const SyntheticEntry& e) {
  return {{"candidate_id", e.candidate_id},
          {"batch_id", e.batch_id},
          {"defect_class", to_string(e.defect_class)},
          {"prompt_version", e.prompt_version},
          {"prompt_mode", to_string(e.prompt_mode)},
          {"reference_ids", e.reference_ids},
          {"image_path", e.image_path}};
}

fs::path vector_dir(const RunPaths& paths, const embedding::EmbeddingBackend& backend) {
  return paths.embeddings_root() / "cache" / hex64(fnv1a64(backend.descriptor()));
}

// Per-class counts of selection: explicit, or multiples of the smallest
// class in the reference fraction.
std::vector<int> selection_counts(const PipelineConfig& c, std::span<const ImageRecord> refs) {
  if (c.selection.multiples.empty()) return c.selection.n_per_class;
  const auto counts = class_counts(refs);
  int base = std::numeric_limits<int>::max();
  for (const auto& [_, n] : counts) base = std::min(base, n);
  std::vector<int> out;
  for (int m : c.selection.multiples) out.push_back(m * base);
  return out;
}

reporting::Aggregate aggregate_of(const json& j) {
  reporting::Aggregate a;
  a.mean = j.at("mean").get<double>();
  a.std = j.at("std").get<double>();
  a.values = j.at("values").get<std::vector<double>>();
  return a;
}

std::string csv_to_markdown(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::ostringstream out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
    if (header) {
      out << '|';
      for (std::size_t i = 0; i < cells.size(); ++i) out << "---|";
      out << '\n';
      header = false;
    }
  }
  return out.str();
}

}  // namespace

std::string fraction_tag(double fraction) {
  const double pct = fraction * 100.0;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%d", static_cast<int>(std::lround(pct)));
  } else {
    std::snprintf(buf, sizeof buf, "%g", pct);
  }
  return buf;
}

std::string format_fraction_plain(double fraction) { return fraction_tag(fraction) + "%"; }

fs::path RunPaths::real_manifest(double fraction) const {
  return manifests_dir() / ("real_" + fraction_tag(fraction) + ".jsonl");
}

fs::path RunPaths::split_manifest(Split s) const {
  return manifests_dir() / (std::string(dataset::to_string(s)) + ".jsonl");
}

fs::path RunPaths::selected_manifest(int n_per_class) const {
  return manifests_dir() / ("selected_" + std::to_string(n_per_class) + ".jsonl");
}

std::string run_timestamp_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path create_run_dir(const PipelineConfig& config, const std::string& timestamp) {
  const auto root = config.runs_root;
  fs::create_directories(root);
  auto dir = root / (timestamp + "-" + config.tag);
  for (int i = 1; fs::exists(dir); ++i) dir = root / (timestamp + "-" + config.tag + "-" + std::to_string(i));
  fs::create_directories(dir);
  const auto latest = root / "latest";
  std::error_code ec;
  if (fs::is_symlink(fs::symlink_status(latest, ec))) fs::remove(latest);
  if (!fs::exists(fs::symlink_status(latest, ec))) fs::create_directory_symlink(dir.filename(), latest);
  return fs::absolute(dir);
}

fs::path resolve_run_dir(const PipelineConfig& config, const std::optional<fs::path>& explicit_dir) {
  if (explicit_dir) {
    if (!fs::is_directory(*explicit_dir)) {
      throw MissingArtifactError("run directory " + explicit_dir->string() +
                                 " does not exist; run `synthaug ingest` first");
    }
    return fs::absolute(*explicit_dir);
  }
  const auto latest = config.runs_root / "latest";
  if (!fs::exists(latest)) {
    throw MissingArtifactError("no run found under " + config.runs_root.string() +
                               "; run `synthaug ingest` first or pass --run-dir");
  }
  return fs::canonical(latest);
}

std::vector<ImageRecord> load_records(const RunPaths& paths) {
  require(paths.records(), "ingest");
  return dataset::read_records(paths.records());
}

dataset::SplitAssignment load_splits(const RunPaths& paths) {
  require(paths.splits(), "split");
  return dataset::split_assignment_from_json(read_json_file(paths.splits()));
}

dataset::FractionPlan load_fraction_plan(const RunPaths& paths) {
  require(paths.fractions(), "split");
  return dataset::fraction_plan_from_json(read_json_file(paths.fractions()));
}

std::vector<ImageRecord> reference_records(const StageContext& ctx) {
  const auto records = load_records(ctx.paths);
  const auto plan = load_fraction_plan(ctx.paths);
  return dataset::records_in_groups(records, plan.groups_for(ctx.config.reference_fraction));
}

std::unique_ptr<generation::GeneratorBackend> make_generator(const GeneratorConfig& config,
                                                              const std::string& backend) {
  if (backend == "mock") return std::make_unique<generation::MockGeneratorBackend>(config.image_size, config.mock_composite);
  if (backend == "http") {
    generation::HttpGeneratorConfig http{config.endpoint, config.model, config.api_key_env, config.timeout_seconds};
    return std::make_unique<generation::HttpGeneratorBackend>(
        std::move(http), std::make_unique<generation::GenerateContentAdapter>());
  }
  throw ConfigError("unknown generator backend '" + backend + "' (expected mock or http)");
}

std::unique_ptr<embedding::EmbeddingBackend> make_embedding_backend(const PipelineConfig& config) {
  const auto& e = config.embedding;
  if (e.backend == "hash-projection") {
    return std::make_unique<embedding::HashProjectionBackend>(e.dimension, config.seed);
  }
  if (e.backend == "onnx") return std::make_unique<embedding::OnnxEmbeddingBackend>(e.model, e.input_size);
  throw ConfigError("unknown embedding backend '" + e.backend + "' (expected hash-projection or onnx)");
}

// ---------------------------------------------------------------- ingest

json stage_ingest(const StageContext& ctx) {
  const auto& ds = ctx.config.dataset;
  if (ctx.dry_run) {
    return {{"stage", "ingest"},
            {"dry_run", true},
            {"annotations", ds.annotations.string()},
            {"images_dir", ds.images_dir.string()},
            {"writes", {ctx.paths.records().string(), ctx.paths.groups().string(),
                        ctx.paths.curation_log().string(), ctx.paths.crops_dir().string()}}};
  }
  require(ds.annotations, "ingest --config with a valid dataset.annotations path;");
  const auto annotations = dataset::read_annotations(ds.annotations);

  std::map<std::string, dataset::ImageSize> sizes;
  std::map<std::string, cv::Mat> sources;
  const auto raw = dataset::group_annotations(annotations, ds.images_dir);
  for (const auto& g : raw) {
    for (const auto& img : g.images) {
      cv::Mat m = load_image(img.source_path);
      sizes[img.image_id] = {m.cols, m.rows};
      sources[img.image_id] = std::move(m);
    }
  }
  for (const auto& a : annotations) dataset::validate_annotation(a, sizes.at(a.image_id));

  auto curated = dataset::curate_groups(raw);
  fs::create_directories(ctx.paths.crops_dir());
  for (auto& r : curated.records) {
    r.source_path = fs::absolute(r.source_path).string();
    const auto out = fs::absolute(ctx.paths.crops_dir() / (r.image_id + ".png"));
    save_png(out, crop(sources.at(r.image_id), r.crop_box));
    r.crop_path = out.string();
  }

  dataset::write_records(ctx.paths.records(), curated.records);
  json groups = json::array();
  for (const auto& g : curated.groups) {
    groups.push_back({{"group_id", g.group_id}, {"class", to_string(g.class_label)}, {"image_ids", g.image_ids}});
  }
  write_json_file(ctx.paths.groups(), groups);
  json dropped = json::array();
  for (const auto& d : curated.dropped) dropped.push_back({{"group_id", d.group_id}, {"reason", d.reason}});
  const json log = {{"annotations", annotations.size()},
                    {"raw_groups", raw.size()},
                    {"kept_groups", curated.groups.size()},
                    {"kept_images", curated.records.size()},
                    {"images_per_class", counts_json(class_counts(curated.records))},
                    {"dropped", dropped}};
  write_json_file(ctx.paths.curation_log(), log);
  write_json_file(ctx.paths.config(), to_json(ctx.config));
  note(ctx, "ingest: kept " + std::to_string(curated.groups.size()) + " groups, dropped " +
                std::to_string(curated.dropped.size()));
  json out = log;
  out["stage"] = "ingest";
  out["run_dir"] = ctx.paths.root.string();
  return out;
}

// ---------------------------------------------------------------- split

json stage_split(const StageContext& ctx) {
  const auto records = load_records(ctx.paths);
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.group_id);
  const std::vector<std::string> group_ids(ids.begin(), ids.end());
  const auto counts = dataset::split_counts(group_ids.size(), ctx.config.split);
  const auto fractions = plan_fractions(ctx.config);
  if (ctx.dry_run) {
    return {{"stage", "split"},
            {"dry_run", true},
            {"groups", group_ids.size()},
            {"train_groups", counts.train},
            {"val_groups", counts.val},
            {"test_groups", counts.test},
            {"fractions", fractions},
            {"seed", ctx.config.seed}};
  }

  const auto assignment = dataset::group_split(group_ids, ctx.config.split, ctx.config.seed);
  write_json_file(ctx.paths.splits(), to_json(assignment));
  const auto train_groups = assignment.groups_in(Split::kTrain);
  const auto plan = dataset::fraction_subsets(train_groups, fractions, ctx.config.seed);
  write_json_file(ctx.paths.fractions(), to_json(plan));

  fs::create_directories(ctx.paths.manifests_dir());
  json out = {{"stage", "split"}, {"seed", ctx.config.seed}};
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto groups = assignment.groups_in(s);
    const auto recs = dataset::records_in_groups(records, groups);
    out[std::string(dataset::to_string(s))] = {{"groups", groups.size()},
                                                {"images", recs.size()},
                                                {"images_per_class", counts_json(class_counts(recs))}};
    if (s == Split::kTrain) continue;
    auto m = manifest_from_records(recs, kPolicyEval);
    m.metadata = {{"split", dataset::to_string(s)}, {"seed", ctx.config.seed}};
    write_manifest(ctx.paths.split_manifest(s), m);
  }
  json fr = json::array();
  for (std::size_t i = 0; i < plan.fractions.size(); ++i) {
    const auto recs = dataset::records_in_groups(records, plan.group_sets[i]);
    auto m = manifest_from_records(recs, kPolicyRealTrain);
    m.metadata = {{"fraction", plan.fractions[i]}, {"groups", plan.group_sets[i].size()}, {"seed", plan.seed}};
    write_manifest(ctx.paths.real_manifest(plan.fractions[i]), m);
    fr.push_back({{"fraction", plan.fractions[i]},
                  {"groups", plan.group_sets[i].size()},
                  {"images", recs.size()},
                  {"images_per_class", counts_json(class_counts(recs))}});
  }
  out["fractions"] = fr;
  note(ctx, "split: " + std::to_string(counts.train) + "/" + std::to_string(counts.val) + "/" +
                std::to_string(counts.test) + " groups");
  return out;
}

// ---------------------------------------------------------------- generate

json stage_generate(const StageContext& ctx, const GenerateOptions& opts) {
  std::vector<BatchPlan> plans;
  for (const auto& b : ctx.config.generation.batches) {
    if (!opts.batch_id || *opts.batch_id == b.batch_id) plans.push_back(b);
  }
  if (plans.empty()) {
    std::string known;
    for (const auto& b : ctx.config.generation.batches) known += (known.empty() ? "" : ", ") + b.batch_id;
    throw ConfigError("unknown batch '" + opts.batch_id.value_or("") + "'; configured batches: " + known);
  }

  const auto refs = reference_records(ctx);
  const auto pool = generation::ReferencePool::from_records(refs);
  const int target = ctx.config.generation.target_per_class;
  const int budget =
      static_cast<int>(std::ceil(ctx.config.generator.budget_factor * target * kNumClasses - 1e-9));

  if (ctx.dry_run) {
    json batches = json::array();
    for (const auto& b : plans) {
      batches.push_back({{"batch_id", b.batch_id},
                         {"prompt_version", b.prompt_version},
                         {"prompt_mode", prompts::to_string(b.prompt_mode)},
                         {"target_per_class", target},
                         {"request_budget", budget}});
    }
    return {{"stage", "generate"},
            {"dry_run", true},
            {"backend", opts.backend.value_or(ctx.config.generator.backend)},
            {"auto_accept", opts.auto_accept},
            {"references_per_class", counts_json(class_counts(refs))},
            {"batches", batches}};
  }

  auto registry = ctx.config.generation.prompts_dir.empty()
                      ? prompts::PromptRegistry::with_defaults()
                      : prompts::PromptRegistry::load(ctx.config.generation.prompts_dir);
  if (!fs::exists(ctx.paths.prompts_dir() / "index.json")) {
    prompts::PromptRegistry snapshot(registry);
    snapshot.save(ctx.paths.prompts_dir());
  }

  auto backend = make_generator(ctx.config.generator, opts.backend.value_or(ctx.config.generator.backend));
  verification::ReviewStore store(ctx.paths.review_root());
  generation::AutoAcceptVerifier auto_accept;
  generation::DeferredVerifier deferred;
  generation::Verifier& verifier = opts.auto_accept ? static_cast<generation::Verifier&>(auto_accept)
                                                    : static_cast<generation::Verifier&>(deferred);

  json batches = json::array();
  for (const auto& b : plans) {
    generation::BatchConfig bc;
    bc.batch_id = b.batch_id;
    bc.prompt_version = b.prompt_version;
    bc.prompt_mode = b.prompt_mode;
    bc.target_per_class = target;
    bc.max_parallel = ctx.config.generator.max_parallel;
    bc.budget_factor = ctx.config.generator.budget_factor;
    bc.seed = mix_seed(ctx.config.seed, "batch/" + b.batch_id);
    bc.retry.max_retries = ctx.config.generator.max_retries;
    bc.retry.initial_backoff = std::chrono::milliseconds(ctx.config.generator.initial_backoff_ms);
    note(ctx, "generate: " + b.batch_id + " (" + b.prompt_version + ", " +
                  std::string(prompts::to_string(b.prompt_mode)) + ")");
    const auto batch = generation::run_batch(bc, *backend, pool, registry, store, verifier);
    json accepted = json::object();
    for (auto c : kAllClasses) {
      auto it = batch.accepted.find(c);
      accepted[std::string(to_string(c))] = it == batch.accepted.end() ? 0 : it->second.size();
    }
    batches.push_back({{"batch_id", batch.batch_id},
                       {"status", verification::to_string(batch.status)},
                       {"requests", batch.request_count},
                       {"rejected", batch.rejected_count},
                       {"pending", batch.pending_count},
                       {"accepted", accepted},
                       {"diagnostic", batch.diagnostic}});
  }
  return {{"stage", "generate"}, {"backend", backend->name()}, {"batches", batches}};
}

// ---------------------------------------------------------------- embed

json stage_embed(const StageContext& ctx) {
  const auto refs = reference_records(ctx);
  auto store = open_store(ctx.paths);
  const auto synthetic = accepted_candidates(store);

  std::vector<embedding::ImageRef> images;
  for (const auto& r : refs) images.push_back({r.image_id, r.crop_path.empty() ? r.source_path : r.crop_path});
  for (const auto& s : synthetic) images.push_back({s.candidate_id, s.image_path});

  if (ctx.dry_run) {
    return {{"stage", "embed"},
            {"dry_run", true},
            {"backend", ctx.config.embedding.backend},
            {"real_images", refs.size()},
            {"synthetic_images", synthetic.size()}};
  }

  auto backend = make_embedding_backend(ctx.config);
  const auto cache = vector_dir(ctx.paths, *backend);
  const auto results = embedding::embed_images_cached(*backend, images, cache, ctx.config.embedding.batch_size);
  std::set<std::string> failed;
  json errors = json::array();
  for (const auto& r : results) {
    if (!r.vector) {
      failed.insert(r.image_id);
      errors.push_back({{"image_id", r.image_id}, {"error", r.error}});
    }
  }

  json real = json::array();
  for (const auto& r : refs) {
    if (!failed.count(r.image_id)) real.push_back({{"image_id", r.image_id}, {"defect_class", to_string(r.defect_class())}});
  }
  json syn = json::array();
  for (const auto& s : synthetic) {
    if (!failed.count(s.candidate_id)) syn.push_back(to_json(s));
  }
  const json index = {{"backend", backend->name()},
                      {"descriptor", backend->descriptor()},
                      {"dimension", backend->dimension()},
                      {"vectors_dir", (cache / backend->name()).string()},
                      {"reference_fraction", ctx.config.reference_fraction},
                      {"real", real},
                      {"synthetic", syn},
                      {"errors", errors}};
  write_json_file(ctx.paths.embedding_index(), index);
  note(ctx, "embed: " + std::to_string(real.size()) + " real, " + std::to_string(syn.size()) + " synthetic, " +
                std::to_string(errors.size()) + " errors");
  return {{"stage", "embed"},
          {"backend", backend->descriptor()},
          {"real", real.size()},
          {"synthetic", syn.size()},
          {"errors", errors}};
}

// ---------------------------------------------------------------- select

json stage_select(const StageContext& ctx, std::optional<int> n_per_class) {
  require(ctx.paths.embedding_index(), "embed");
  const json index = read_json_file(ctx.paths.embedding_index());
  auto backend = make_embedding_backend(ctx.config);
  if (index.at("descriptor").get<std::string>() != backend->descriptor()) {
    throw ConfigError("embeddings were computed with '" + index.at("descriptor").get<std::string>() +
                      "' but the config now selects '" + backend->descriptor() + "'; rerun `synthaug embed`");
  }
  const fs::path vec_dir = index.at("vectors_dir").get<std::string>();
  auto vec = [&](const std::string& id) { return embedding::read_vec(vec_dir / (id + ".vec")); };

  const auto refs = reference_records(ctx);
  std::set<std::string> allowed;
  for (const auto& r : refs) allowed.insert(r.image_id);

  std::map<std::string, std::vector<float>> real_vecs;
  std::map<DefectClass, std::vector<embedding::EmbeddingVector>> by_class;
  for (const auto& r : index.at("real")) {
    const auto id = r.at("image_id").get<std::string>();
    if (!allowed.count(id)) continue;
    real_vecs[id] = vec(id);
    by_class[parse_defect_class(r.at("defect_class").get<std::string>())].push_back({id, real_vecs[id]});
  }
  for (auto c : kAllClasses) by_class[c];
  const auto centroids = embedding::class_centroids(by_class);
  embedding::check_centroid_sources(centroids, allowed);

  std::vector<SyntheticEntry> entries;
  for (const auto& s : index.at("synthetic")) entries.push_back(synthetic_entry_from_json(s));

  std::set<std::string> pool_batches(ctx.config.selection.pool_batches.begin(),
                                     ctx.config.selection.pool_batches.end());
  std::vector<embedding::SelectionCandidate> pool;
  std::map<std::string, std::vector<float>> syn_vecs;
  for (const auto& e : entries) {
    syn_vecs[e.candidate_id] = vec(e.candidate_id);
    const bool in_pool = pool_batches.empty() ? e.prompt_mode == prompts::PromptMode::kDualRef
                                              : pool_batches.count(e.batch_id) > 0;
    if (in_pool) pool.push_back({e.candidate_id, e.defect_class, e.image_path, syn_vecs[e.candidate_id]});
  }
  std::map<DefectClass, int> pool_sizes;
  for (auto c : kAllClasses) pool_sizes[c] = 0;
  for (const auto& p : pool) ++pool_sizes[p.defect_class];

  const auto counts = n_per_class ? std::vector<int>{*n_per_class} : selection_counts(ctx.config, refs);
  if (ctx.dry_run) {
    return {{"stage", "select"},
            {"dry_run", true},
            {"n_per_class", counts},
            {"pool_per_class", counts_json(pool_sizes)},
            {"centroid_sources", allowed.size()}};
  }

  json centroid_meta = json::object();
  for (const auto& c : centroids) {
    centroid_meta[std::string(to_string(c.defect_class))] = {{"n_source", c.n_source}, {"source_ids", c.source_ids}};
  }
  json selections = json::array();
  for (int n : counts) {
    TrainingManifest m;
    m.items = embedding::select_top_n(pool, centroids, {n});
    m.metadata = {{"n_per_class", n},
                  {"pool_per_class", counts_json(pool_sizes)},
                  {"embedding", backend->descriptor()},
                  {"centroid_source", "real training fraction " + format_fraction_plain(ctx.config.reference_fraction)},
                  {"centroids", centroid_meta},
                  {"excluded_from_centroids", "validation, test and synthetic images"}};
    write_manifest(ctx.paths.selected_manifest(n), m);
    selections.push_back({{"n_per_class", n},
                          {"manifest", ctx.paths.selected_manifest(n).string()},
                          {"items", m.items.size()}});
  }

  // Diversity per prompt version and mode, and per batch.
  auto diversity_of = [&](const std::vector<const SyntheticEntry*>& group) -> json {
    std::vector<embedding::DiversityItem> items;
    for (const auto* e : group) {
      embedding::DiversityItem item{syn_vecs.at(e->candidate_id), {}};
      for (const auto& r : e->reference_ids) {
        auto it = real_vecs.find(r);
        if (it == real_vecs.end()) throw DataError("reference " + r + " of " + e->candidate_id + " has no embedding");
        item.references.push_back(it->second);
      }
      items.push_back(std::move(item));
    }
    std::vector<std::vector<float>> real;
    for (const auto& [_, v] : real_vecs) real.push_back(v);
    try {
      return to_json(embedding::diversity_ratio(items, real, mix_seed(ctx.config.seed, "diversity")));
    } catch (const DataError& err) {
      return {{"error", err.what()}};
    }
  };
  std::map<std::string, std::vector<const SyntheticEntry*>> by_prompt, by_batch;
  for (const auto& e : entries) {
    by_prompt[e.prompt_version + "/" + std::string(prompts::to_string(e.prompt_mode))].push_back(&e);
    by_batch[e.batch_id].push_back(&e);
  }
  json prompt_rows = json::array();
  for (const auto& [label, group] : by_prompt) {
    json row = diversity_of(group);
    row["label"] = label;
    prompt_rows.push_back(row);
  }
  json batch_rows = json::array();
  for (const auto& [label, group] : by_batch) {
    json row = diversity_of(group);
    row["batch_id"] = label;
    batch_rows.push_back(row);
  }
  const json diversity = {{"embedding", backend->descriptor()}, {"by_prompt", prompt_rows}, {"by_batch", batch_rows}};
  write_json_file(ctx.paths.reports_dir() / "diversity.json", diversity);
  return {{"stage", "select"}, {"selections", selections}, {"diversity", diversity}};
}

// ---------------------------------------------------------------- train

std::string train_label(const TrainRequest& r, double fraction) {
  std::string label;
  if (r.mode == TrainMode::kZeroShot) return "zero_shot";
  if (r.mode == TrainMode::kLinearProbe) label = "probe_";
  label += "f" + fraction_tag(fraction) + "_real";
  if (r.selected_n_per_class) label += "+sel" + std::to_string(*r.selected_n_per_class);
  if (!r.manual_batches.empty()) {
    label += "+manual";
    for (const auto& b : r.manual_batches) label += "-" + b;
  }
  if (r.randaugment) label += "+randaug";
  return label;
}

json stage_train(const StageContext& ctx, const TrainRequest& request) {
  const double fraction = request.fraction.value_or(ctx.config.reference_fraction);
  const auto label = train_label(request, fraction);
  const auto test = load_eval(ctx.paths, Split::kTest);
  classifier::ImageStore images(ctx.paths.root);

  if (request.mode == TrainMode::kZeroShot) {
    const auto& z = ctx.config.zero_shot;
    std::unique_ptr<classifier::VisionLanguageBackend> vl;
    if (z.backend == "mock") {
      vl = std::make_unique<classifier::MockVisionLanguageBackend>(ctx.config.seed);
    } else if (z.backend == "onnx") {
      vl = std::make_unique<classifier::OnnxVisionLanguageBackend>(z.image_model, z.text_embeddings);
    } else {
      vl = std::make_unique<classifier::UnavailableVisionLanguageBackend>(
          "no vision-language backend configured (zero_shot.backend = none)");
    }
    if (ctx.dry_run) return {{"stage", "train"}, {"dry_run", true}, {"mode", "zero-shot"}, {"backend", vl->name()}};
    const auto result = classifier::zero_shot_vl_eval(*vl, z.class_prompts, test, images);
    json out = to_json(result);
    out["label"] = label;
    write_json_file(ctx.paths.reports_dir() / (label + ".json"), out);
    return out;
  }

  const auto real = load_real(ctx, fraction);
  std::optional<TrainingManifest> synthetic;
  std::string synthetic_source = "none";
  if (request.selected_n_per_class) {
    const auto path = ctx.paths.selected_manifest(*request.selected_n_per_class);
    require(path, "select --n-per-class " + std::to_string(*request.selected_n_per_class));
    synthetic = read_manifest(path);
    synthetic_source = "embedding selection " + path.filename().string();
  } else if (!request.manual_batches.empty()) {
    auto store = open_store(ctx.paths);
    for (const auto& b : request.manual_batches) {
      if (!store.has_batch(b)) throw NotFoundError("batch " + b + " not found in the review store");
    }
    TrainingManifest m;
    for (const auto& e : accepted_candidates(store, request.manual_batches)) m.items.push_back(synthetic_item(e));
    m.metadata = {{"manual_batches", request.manual_batches}};
    synthetic = std::move(m);
    synthetic_source = "manual batches";
  }
  const auto dataset = classifier::build_training_set(real, synthetic ? &*synthetic : nullptr);

  if (ctx.dry_run) {
    return {{"stage", "train"},
            {"dry_run", true},
            {"label", label},
            {"n_train_real", dataset.n_real},
            {"n_train_synthetic", dataset.n_synthetic},
            {"n_test", test.size()},
            {"seeds", ctx.config.seeds}};
  }

  classifier::TrainConfig cfg = ctx.config.train;
  cfg.randaugment = request.randaugment;
  json out;
  if (request.mode == TrainMode::kLinearProbe) {
    auto frozen = make_embedding_backend(ctx.config);
    cfg.hidden = 0;
    std::vector<double> p, r, f;
    json per_seed = json::array();
    for (auto s : ctx.config.seeds) {
      cfg.seed = s;
      const auto entry = classifier::linear_probe(*frozen, dataset.items, test, cfg, images);
      p.push_back(entry.prf.precision);
      r.push_back(entry.prf.recall);
      f.push_back(entry.prf.f1);
      per_seed.push_back({{"seed", s}, {"test", to_json(entry)}});
    }
    const auto f1 = reporting::aggregate_runs(f);
    out = {{"label", label},
           {"mode", "linear-probe"},
           {"embedding", frozen->descriptor()},
           {"n_train_real", dataset.n_real},
           {"n_train_synthetic", dataset.n_synthetic},
           {"seeds", per_seed},
           {"precision", to_json(reporting::aggregate_runs(p))},
           {"recall", to_json(reporting::aggregate_runs(r))},
           {"f1", to_json(f1)},
           {"f1_display", reporting::format_mean_std(f1)}};
  } else {
    const auto val = load_eval(ctx.paths, Split::kVal);
    auto backbone = classifier::make_backbone(cfg);
    note(ctx, "train: " + label + " (" + std::to_string(dataset.n_real) + " real, " +
                  std::to_string(dataset.n_synthetic) + " synthetic)");
    auto report = classifier::run_seeds(label, cfg, dataset, val, test, ctx.config.seeds, images, *backbone,
                                        ctx.paths.checkpoints_dir());
    report.notes["fraction"] = fraction;
    report.notes["synthetic_source"] = synthetic_source;
    out = to_json(report);
  }
  write_json_file(ctx.paths.reports_dir() / (label + ".json"), out);
  return out;
}

json stage_compare(const StageContext& ctx) {
  std::vector<TrainRequest> requests;
  requests.push_back({});
  const auto refs = reference_records(ctx);
  for (int n : selection_counts(ctx.config, refs)) {
    TrainRequest r;
    r.selected_n_per_class = n;
    requests.push_back(r);
  }
  for (const auto& batches : ctx.config.comparison.manual_batches) {
    TrainRequest r;
    r.manual_batches = batches;
    requests.push_back(r);
  }

  json rows = json::array();
  std::optional<double> baseline;
  for (const auto& r : requests) {
    const auto report = stage_train(ctx, r);
    if (ctx.dry_run) {
      rows.push_back(report);
      continue;
    }
    const double mean = report.at("f1").at("mean").get<double>();
    if (!baseline) baseline = mean;
    rows.push_back({{"label", report.at("label")},
                    {"kind", r.selected_n_per_class ? "embedding selection"
                             : r.manual_batches.empty() ? "real only"
                                                        : "manual batches"},
                    {"n_train_real", report.at("n_train_real")},
                    {"n_train_synthetic", report.at("n_train_synthetic")},
                    {"f1", report.at("f1")},
                    {"f1_display", report.at("f1_display")},
                    {"delta_vs_real_only", reporting::format_signed(mean - *baseline)}});
  }
  const json out = {{"stage", "compare"}, {"rows", rows}};
  if (!ctx.dry_run) write_json_file(ctx.paths.reports_dir() / "comparison.json", out);
  return out;
}

// ---------------------------------------------------------------- sweep

json stage_sweep(const StageContext& ctx) {
  const auto records = load_records(ctx.paths);
  const auto splits = load_splits(ctx.paths);
  const auto plan = load_fraction_plan(ctx.paths);
  const auto val = load_eval(ctx.paths, Split::kVal);
  const auto test = load_eval(ctx.paths, Split::kTest);
  const auto train_records = dataset::records_in_groups(records, splits.groups_in(Split::kTrain));
  if (ctx.dry_run) {
    return {{"stage", "sweep"},
            {"dry_run", true},
            {"fractions", plan.fractions},
            {"randaugment", ctx.config.sweep_randaugment},
            {"seeds", ctx.config.seeds}};
  }
  classifier::ImageStore images(ctx.paths.root);
  auto backbone = classifier::make_backbone(ctx.config.train);
  note(ctx, "sweep: " + std::to_string(plan.fractions.size()) + " fractions");
  const auto table = classifier::fraction_sweep(plan, train_records, val, test, ctx.config.train, ctx.config.seeds,
                                                images, *backbone, ctx.config.sweep_randaugment);
  const auto csv = classifier::sweep_csv(table);
  fs::create_directories(ctx.paths.reports_dir());
  write_text_file(ctx.paths.reports_dir() / "sweep.csv", csv);
  json rows = json::array();
  for (const auto& row : table.rows) {
    json j = {{"fraction", row.fraction}, {"images", row.images}, {"baseline", to_json(row.baseline)}};
    if (row.randaugment) {
      j["randaugment"] = to_json(*row.randaugment);
      j["delta"] = row.delta();
    }
    rows.push_back(j);
  }
  write_json_file(ctx.paths.reports_dir() / "sweep.json", {{"rows", rows}});
  return {{"stage", "sweep"}, {"csv", csv}};
}

// ---------------------------------------------------------------- report

json stage_report(const StageContext& ctx) {
  reporting::SummaryInputs in;
  json out = {{"stage", "report"}};
  fs::create_directories(ctx.paths.reports_dir());

  if (fs::exists(ctx.paths.review_root())) {
    verification::ReviewStore store(ctx.paths.review_root());
    std::vector<reporting::UsageRecord> usage;
    for (const auto& b : store.list_batches()) {
      for (const auto& c : store.candidates(b.info.batch_id)) {
        usage.push_back({c.candidate_id, b.info.batch_id, c.token_usage.input_tokens, c.token_usage.output_text_tokens,
                         c.token_usage.output_image_tokens});
      }
    }
    const auto cost = reporting::compute_cost(usage, ctx.config.pricing);
    std::map<std::string, std::int64_t> cost_by_batch;
    for (const auto& r : cost.rows) cost_by_batch[r.batch_id] = r.cost_pico;

    std::vector<reporting::BatchSummary> summaries;
    for (const auto& b : store.list_batches()) {
      std::string prompt = b.info.prompt_version;
      if (b.info.prompt_mode == prompts::PromptMode::kSingleRef) prompt += " (single ref)";
      reporting::BatchSummary s{b.info.batch_id, prompt, b.requests, b.rejected, b.info.target_total(), b.pending,
                                std::nullopt};
      if (auto it = cost_by_batch.find(b.info.batch_id); it != cost_by_batch.end()) s.cost_pico = it->second;
      summaries.push_back(s);
    }
    if (!ctx.dry_run) {
      reporting::write_cost_csv(ctx.paths.reports_dir() / "cost.csv", cost);
      if (!summaries.empty()) {
        const auto table = reporting::rejection_table(summaries);
        reporting::write_rejections_csv(ctx.paths.reports_dir() / "rejections.csv", table);
        in.rejections = table;
      }
    }
    in.cost = cost;
    out["total_cost_usd"] = reporting::format_usd(cost.total.cost_pico);
    out["batches"] = summaries.size();
  }

  const auto diversity_path = ctx.paths.reports_dir() / "diversity.json";
  if (fs::exists(diversity_path)) {
    for (const auto& row : read_json_file(diversity_path).at("by_prompt")) {
      if (row.contains("ratio")) in.diversity.emplace_back(row.at("label").get<std::string>(), row.at("ratio").get<double>());
    }
  }

  std::vector<fs::path> reports;
  for (const auto& entry : fs::directory_iterator(ctx.paths.reports_dir())) {
    if (entry.path().extension() == ".json") reports.push_back(entry.path());
  }
  std::sort(reports.begin(), reports.end());
  for (const auto& p : reports) {
    const auto j = read_json_file(p);
    if (j.is_object() && j.contains("label") && j.contains("f1") && j.at("f1").is_object()) {
      in.evaluations.emplace_back(j.at("label").get<std::string>(), aggregate_of(j.at("f1")));
    }
  }
  const auto sweep = ctx.paths.reports_dir() / "sweep.csv";
  if (fs::exists(sweep)) in.extra_markdown = "## Fraction sweep\n\n" + csv_to_markdown(read_text_file(sweep));

  const auto md = reporting::render_summary_markdown(in);
  if (!ctx.dry_run) write_text_file(ctx.paths.reports_dir() / "summary.md", md);
  out["summary"] = (ctx.paths.reports_dir() / "summary.md").string();
  out["evaluations"] = in.evaluations.size();
  return out;
}

}  // namespace synthaug::pipeline
