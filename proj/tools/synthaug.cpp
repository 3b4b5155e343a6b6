// Command-line entry point: one subcommand per pipeline stage. Every
// subcommand prints a JSON summary on stdout; errors go to stderr and map to
// the exit codes in common/errors.hpp.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/pipeline/stages.hpp"
#include "synthaug/verification/service.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::pipeline;

struct Common {
  std::string config;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Pipeline config (JSON)")->required();
  sub->add_option("--run-dir", c.run_dir, "Run directory (default: <runs_root>/latest)");
  sub->add_option("--seed", c.seed, "Override the config seed");
  sub->add_flag("--dry-run", c.dry_run, "Print the plan without writing anything");
}

StageContext make_context(const Common& c, bool new_run) {
  StageContext ctx;
  ctx.config = load_pipeline_config(c.config);
  if (c.seed) ctx.config.seed = *c.seed;
  ctx.dry_run = c.dry_run;
  ctx.log = &std::cerr;
  std::optional<fs::path> explicit_dir;
  if (!c.run_dir.empty()) explicit_dir = fs::path(c.run_dir);
  if (new_run && !explicit_dir) {
    ctx.paths.root = c.dry_run ? ctx.config.runs_root / (run_timestamp_now() + "-" + ctx.config.tag)
                               : create_run_dir(ctx.config, run_timestamp_now());
  } else if (new_run) {
    if (!c.dry_run) fs::create_directories(*explicit_dir);
    ctx.paths.root = fs::absolute(*explicit_dir);
  } else {
    ctx.paths.root = resolve_run_dir(ctx.config, explicit_dir);
  }
  return ctx;
}

TrainRequest parse_synthetic(const std::string& spec, TrainRequest r) {
  if (spec.empty() || spec == "none") return r;
  if (spec.rfind("selected:", 0) == 0) {
    try {
      r.selected_n_per_class = std::stoi(spec.substr(9));
    } catch (const std::exception&) {
      throw ConfigError("--synthetic selected:<n> needs an integer, got '" + spec + "'");
    }
    return r;
  }
  if (spec.rfind("batches:", 0) == 0) {
    std::string rest = spec.substr(8);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const auto item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!item.empty()) r.manual_batches.push_back(item);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (r.manual_batches.empty()) throw ConfigError("--synthetic batches: needs at least one batch id");
    return r;
  }
  throw ConfigError("--synthetic must be none, selected:<n> or batches:<id,...>; got '" + spec + "'");
}

int serve(const StageContext& ctx, const std::string& host, int port) {
  verification::ReviewStore store(ctx.paths.review_root());
  const auto records = load_records(ctx.paths);
  const auto splits = load_splits(ctx.paths);
  verification::ServiceConfig sc;
  sc.host = host;
  sc.port = port;
  sc.real_records = dataset::records_in_groups(records, splits.groups_in(dataset::Split::kTrain));
  sc.static_dir = ctx.config.review.static_dir;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  verification::VerificationService service(store, sc);
  const int bound = service.start_background();
  std::cout << json{{"stage", "review-serve"}, {"host", host}, {"port", bound}}.dump() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic defect augmentation pipeline"};
  app.require_subcommand(1);

  Common common;
  GenerateOptions gen;
  std::string backend;
  std::optional<int> n_per_class;
  std::optional<double> fraction;
  std::string synthetic = "none";
  std::string mode = "supervised";
  bool randaugment = false;
  bool compare = false;
  std::string host;
  std::optional<int> port;

  auto* ingest = app.add_subcommand("ingest", "Curate annotations into a new run directory");
  auto* split = app.add_subcommand("split", "Group-aware train/val/test split and nested fractions");
  auto* generate = app.add_subcommand("generate", "Generate candidate batches");
  auto* review = app.add_subcommand("review-serve", "Serve the review API");
  auto* embed = app.add_subcommand("embed", "Embed references and accepted candidates");
  auto* select = app.add_subcommand("select", "Centroid-distance selection and diversity");
  auto* train = app.add_subcommand("train", "Train and evaluate over all seeds");
  auto* sweep = app.add_subcommand("sweep", "Fraction sweep with and without RandAugment");
  auto* report = app.add_subcommand("report", "Cost, rejection and summary reports");
  for (auto* sub : {ingest, split, generate, review, embed, select, train, sweep, report}) add_common(sub, common);

  generate->add_option("--batch-id", gen.batch_id, "Only this batch");
  generate->add_flag("--auto-accept", gen.auto_accept, "Accept every candidate without review");
  generate->add_option("--backend", backend, "Override generator.backend (mock|http)");
  review->add_option("--host", host, "Bind address (default from config)");
  review->add_option("--port", port, "Port (default from config; 0 picks a free one)");
  select->add_option("--n-per-class", n_per_class, "Select only this many per class");
  train->add_option("--fraction", fraction, "Real training fraction (default: reference fraction)");
  train->add_option("--synthetic", synthetic, "none | selected:<n> | batches:<id,...>");
  train->add_flag("--randaugment", randaugment, "RandAugment on real images");
  train->add_option("--mode", mode, "supervised | zero-shot | linear-probe")
      ->check(CLI::IsMember({"supervised", "zero-shot", "linear-probe"}));
  train->add_flag("--compare", compare, "Real-only vs selected vs manual-batch comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    json out;
    if (ingest->parsed()) {
      out = stage_ingest(make_context(common, true));
    } else if (split->parsed()) {
      out = stage_split(make_context(common, false));
    } else if (generate->parsed()) {
      if (!backend.empty()) gen.backend = backend;
      out = stage_generate(make_context(common, false), gen);
    } else if (review->parsed()) {
      const auto ctx = make_context(common, false);
      return serve(ctx, host.empty() ? ctx.config.review.host : host, port.value_or(ctx.config.review.port));
    } else if (embed->parsed()) {
      out = stage_embed(make_context(common, false));
    } else if (select->parsed()) {
      out = stage_select(make_context(common, false), n_per_class);
    } else if (train->parsed()) {
      TrainRequest r;
      r.fraction = fraction;
      r.randaugment = randaugment;
      r.mode = mode == "zero-shot"      ? TrainMode::kZeroShot
               : mode == "linear-probe" ? TrainMode::kLinearProbe
                                        : TrainMode::kSupervised;
      // Flag errors first, before the run directory is looked up.
      r = parse_synthetic(synthetic, r);
      const auto ctx = make_context(common, false);
      out = compare ? stage_compare(ctx) : stage_train(ctx, r);
    } else if (sweep->parsed()) {
      out = stage_sweep(make_context(common, false));
    } else if (report->parsed()) {
      out = stage_report(make_context(common, false));
    }
    std::cout << out.dump(2) << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kInternal);
  }
  return 0;
}
