#include <atomic>
#include <cstdlib>
#include <mutex>
#include <set>

#include <gtest/gtest.h>
#include <httplib.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/generation/orchestrator.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::generation;
using synthaug::testing::TempDir;
using verification::BatchStatus;
using verification::Decision;
using verification::ReviewStore;
using verification::ReviewTask;
using verification::Verdict;

ReferencePool make_pool(const fs::path& dir, std::size_t groups) {
  const auto recs = synthaug::testing::write_record_images(dir, groups, 1, 4);
  return ReferencePool::from_records(recs);
}

// Rejects the first `n` first-pass candidates of each class in arrival order.
class RejectFirst final : public Verifier {
 public:
  explicit RejectFirst(int n) : n_(n) {}
  std::optional<Decision> review(const ReviewTask& task, const SyntheticCandidate& c) override {
    const bool reject = !c.replaces && seen_[c.defect_class]++ < n_;
    return Decision{task.candidate_id, reject ? Verdict::kReject : Verdict::kAccept, "tester", "", std::nullopt};
  }

 private:
  int n_;
  std::map<DefectClass, int> seen_;
};

class RejectAll final : public Verifier {
 public:
  std::optional<Decision> review(const ReviewTask& task, const SyntheticCandidate&) override {
    return Decision{task.candidate_id, Verdict::kReject, "tester", "", std::string("bad")};
  }
};

class FlakyBackend final : public GeneratorBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  std::string name() const override { return "flaky"; }
  GeneratorCapabilities capabilities() const override { return {2, 32}; }
  GenerationResult generate(const GenerationRequest& r) override {
    if (calls_++ < failures_) throw BackendError("transient");
    return inner_.generate(r);
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  std::atomic<int> calls_{0};
  MockGeneratorBackend inner_{32};
};

BatchConfig small_batch(const std::string& id, int target) {
  BatchConfig c;
  c.batch_id = id;
  c.target_per_class = target;
  c.seed = 17;
  c.retry.sleep = [](std::chrono::milliseconds) {};
  return c;
}

TEST(ReferenceSampler, PoolOfTwoReturnsThatPair) {
  ReferencePool pool;
  pool.ids[DefectClass::kShell] = {"a", "b"};
  Rng rng(0);
  const auto [x, y] = sample_reference_pair(pool, DefectClass::kShell, rng);
  EXPECT_EQ((std::set<std::string>{x, y}), (std::set<std::string>{"a", "b"}));
}

TEST(ReferenceSampler, ThousandDrawsAlwaysDistinct) {
  ReferencePool pool;
  for (int i = 0; i < 52; ++i) pool.ids[DefectClass::kGlaze].push_back("r" + std::to_string(i));
  ReferenceSampler s(pool, DefectClass::kGlaze, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto [a, b] = s.next_pair();
    ASSERT_NE(a, b);
  }
}

TEST(ReferenceSampler, DeterministicAndWithoutReplacementPerPass) {
  ReferencePool pool;
  for (int i = 0; i < 10; ++i) pool.ids[DefectClass::kShell].push_back("r" + std::to_string(i));
  ReferenceSampler a(pool, DefectClass::kShell, 9), b(pool, DefectClass::kShell, 9);
  std::multiset<std::string> first_pass;
  for (int i = 0; i < 5; ++i) {
    const auto p = a.next_pair();
    EXPECT_EQ(p, b.next_pair());
    first_pass.insert(p.first);
    first_pass.insert(p.second);
  }
  EXPECT_EQ(first_pass.size(), 10u);
  EXPECT_EQ(std::set<std::string>(first_pass.begin(), first_pass.end()).size(), 10u);
}

TEST(ReferenceSampler, TooSmallPoolIsConfigError) {
  ReferencePool pool;
  pool.ids[DefectClass::kShell] = {"only"};
  EXPECT_THROW(ReferenceSampler(pool, DefectClass::kShell, 0), ConfigError);
}

TEST(MockBackend, ByteIdenticalForSameSeed) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 6);
  for (auto mode : {MockComposite::kAlphaBlend, MockComposite::kSeam}) {
    MockGeneratorBackend backend(48, mode);
    GenerationRequest r;
    r.prompt_text = "x";
    r.references = {pool.image(pool.ids.at(DefectClass::kShell)[0]), pool.image(pool.ids.at(DefectClass::kShell)[1])};
    r.seed = 5;
    const auto a = backend.generate(r);
    const auto b = backend.generate(r);
    EXPECT_EQ(a.image_png, b.image_png);
    r.seed = 6;
    EXPECT_NE(backend.generate(r).image_png, a.image_png);
    const cv::Mat img = decode_image(a.image_png);
    EXPECT_EQ(img.size(), cv::Size(48, 48));
    EXPECT_EQ(a.usage.input_tokens, 2 * 258);
    EXPECT_EQ(a.usage.output_image_tokens, 1120);
  }
  EXPECT_THROW(parse_mock_composite("collage"), ConfigError);
}

TEST(GenerateCandidate, LineageAndUsage) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 6);
  MockGeneratorBackend backend(32);
  const auto prompt = prompts::PromptRegistry::with_defaults().get(DefectClass::kShell, "V2", prompts::PromptMode::kDualRef);
  const auto& ids = pool.ids.at(DefectClass::kShell);
  const GenerationJob job{"b0", 3, DefectClass::kShell, {ids[0], ids[1]}, std::nullopt};
  const auto c = generate_candidate(backend, pool, prompt, job, dir / "b0", 1, {});
  EXPECT_EQ(c.reference_ids, job.reference_ids);
  EXPECT_EQ(c.candidate_id, candidate_id_for("b0", 3));
  EXPECT_EQ(c.decision, CandidateDecision::kPending);
  EXPECT_GE(c.token_usage.input_tokens, 0);
  EXPECT_GE(c.token_usage.output_text_tokens, 0);
  EXPECT_GE(c.token_usage.output_image_tokens, 0);
  EXPECT_TRUE(fs::exists(dir / "b0" / c.image_path));
  EXPECT_NO_THROW(check_invariants(c));
}

TEST(GenerateCandidate, RetriesWithExponentialBackoffThenFails) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 6);
  const auto prompt = prompts::PromptRegistry::with_defaults().get(DefectClass::kShell, "V2", prompts::PromptMode::kDualRef);
  const auto& ids = pool.ids.at(DefectClass::kShell);
  const GenerationJob job{"b0", 0, DefectClass::kShell, {ids[0], ids[1]}, std::nullopt};
  std::vector<std::int64_t> sleeps;
  RetryPolicy retry;
  retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };

  FlakyBackend recovers(2);
  EXPECT_NO_THROW(generate_candidate(recovers, pool, prompt, job, dir / "b0", 1, retry));
  EXPECT_EQ(sleeps, (std::vector<std::int64_t>{500, 1000}));

  sleeps.clear();
  FlakyBackend dead(100);
  EXPECT_THROW(generate_candidate(dead, pool, prompt, job, dir / "b0", 1, retry), BackendError);
  EXPECT_EQ(dead.calls(), 4);
  EXPECT_EQ(sleeps, (std::vector<std::int64_t>{500, 1000, 2000}));
}

TEST(RunBatch, AutoAcceptFourPerClass) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  MockGeneratorBackend backend(32);
  ReviewStore store(dir / "review");
  AutoAcceptVerifier verifier;
  const auto registry = prompts::PromptRegistry::with_defaults();
  const auto batch = run_batch(small_batch("b0", 4), backend, pool, registry, store, verifier);
  EXPECT_TRUE(batch.complete());
  EXPECT_EQ(batch.status, BatchStatus::kComplete);
  EXPECT_EQ(batch.request_count, 8);
  EXPECT_EQ(batch.accepted.at(DefectClass::kShell).size() + batch.accepted.at(DefectClass::kGlaze).size(), 8u);
}

TEST(RunBatch, RejectionsAreRegeneratedAndConserved) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  MockGeneratorBackend backend(32);
  ReviewStore store(dir / "review");
  RejectFirst verifier(3);
  const auto registry = prompts::PromptRegistry::with_defaults();
  const auto batch = run_batch(small_batch("b1", 6), backend, pool, registry, store, verifier);
  EXPECT_TRUE(batch.complete());
  EXPECT_EQ(batch.rejected_count, 6);
  EXPECT_EQ(batch.request_count, 18);
  EXPECT_EQ(batch.request_count - 12, batch.rejected_count);
  EXPECT_EQ(store.emitted_regeneration_tasks("b1").size(), 6u);
  EXPECT_TRUE(store.open_regeneration_tasks("b1").empty());

  // Conditioning never crosses classes.
  for (const auto& c : store.candidates("b1")) {
    const auto& ids = pool.ids.at(c.defect_class);
    for (const auto& r : c.reference_ids) EXPECT_TRUE(std::count(ids.begin(), ids.end(), r)) << r;
    EXPECT_EQ(c.reference_ids.size(), 2u);
  }
}

TEST(RunBatch, BudgetExhaustionStopsWithDiagnostic) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  MockGeneratorBackend backend(32);
  ReviewStore store(dir / "review");
  RejectAll verifier;
  const auto registry = prompts::PromptRegistry::with_defaults();
  const auto batch = run_batch(small_batch("b2", 2), backend, pool, registry, store, verifier);
  EXPECT_EQ(batch.status, BatchStatus::kIncomplete);
  EXPECT_EQ(batch.request_count, 12);  // ceil(3 x 4)
  EXPECT_NE(batch.diagnostic.find("budget"), std::string::npos);
}

TEST(RunBatch, BackendOutagePausesBatch) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  FlakyBackend backend(1000);
  ReviewStore store(dir / "review");
  AutoAcceptVerifier verifier;
  auto cfg = small_batch("b3", 2);
  cfg.retry.max_retries = 1;
  const auto batch = run_batch(cfg, backend, pool, prompts::PromptRegistry::with_defaults(), store, verifier);
  EXPECT_EQ(batch.status, BatchStatus::kPaused);
  EXPECT_NE(batch.diagnostic.find("failed after 2 attempts"), std::string::npos);
}

TEST(RunBatch, ResumeKeepsDecidedCandidates) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  MockGeneratorBackend backend(32);
  const auto registry = prompts::PromptRegistry::with_defaults();
  std::vector<std::string> first_ids;
  {
    ReviewStore store(dir / "review");
    DeferredVerifier deferred;
    const auto batch = run_batch(small_batch("b4", 3), backend, pool, registry, store, deferred);
    EXPECT_EQ(batch.status, BatchStatus::kAwaitingReview);
    EXPECT_EQ(batch.pending_count, 6);
    for (const auto& c : store.candidates("b4")) first_ids.push_back(c.candidate_id);
    store.record_decision({first_ids[0], Verdict::kAccept, "a", "", std::nullopt});
    store.record_decision({first_ids[1], Verdict::kReject, "a", "", std::nullopt});
  }
  ReviewStore store(dir / "review");
  AutoAcceptVerifier verifier;
  const auto batch = run_batch(small_batch("b4", 3), backend, pool, registry, store, verifier);
  EXPECT_TRUE(batch.complete());
  EXPECT_EQ(batch.request_count, 7);
  EXPECT_EQ(store.find_candidate(first_ids[0])->decision_meta->annotator, "a");
  EXPECT_EQ(store.candidates("b4").front().candidate_id, first_ids[0]);
}

TEST(RunBatch, SameSeedSameCandidates) {
  TempDir a, b;
  const auto pool_a = make_pool(a / "refs", 10);
  const auto pool_b = make_pool(b / "refs", 10);
  MockGeneratorBackend backend(32);
  const auto registry = prompts::PromptRegistry::with_defaults();
  ReviewStore sa(a / "review"), sb(b / "review");
  AutoAcceptVerifier v;
  run_batch(small_batch("b5", 3), backend, pool_a, registry, sa, v);
  run_batch(small_batch("b5", 3), backend, pool_b, registry, sb, v);
  const auto ca = sa.candidates("b5");
  const auto cb = sb.candidates("b5");
  ASSERT_EQ(ca.size(), cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    EXPECT_EQ(ca[i].candidate_id, cb[i].candidate_id);
    EXPECT_EQ(ca[i].reference_ids, cb[i].reference_ids);
    EXPECT_EQ(read_text_file(sa.batch_dir("b5") / ca[i].image_path), read_text_file(sb.batch_dir("b5") / cb[i].image_path));
  }
}

TEST(RunBatch, SingleReferenceMode) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 10);
  MockGeneratorBackend backend(32);
  ReviewStore store(dir / "review");
  AutoAcceptVerifier verifier;
  auto cfg = small_batch("b6", 2);
  cfg.prompt_mode = prompts::PromptMode::kSingleRef;
  run_batch(cfg, backend, pool, prompts::PromptRegistry::with_defaults(), store, verifier);
  for (const auto& c : store.candidates("b6")) EXPECT_EQ(c.reference_ids.size(), 1u);
}

// ---------------------------------------------------------------- HTTP

TEST(Base64, RoundTripAllLengths) {
  Rng rng(2);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(uniform_index(rng, 256));
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes) << n;
  }
  EXPECT_EQ(base64_encode({'M', 'a'}), "TWE=");
  EXPECT_THROW(base64_decode("abc"), BackendError);
}

TEST(GenerateContentAdapter, ParsesImageAndModalityUsage) {
  GenerateContentAdapter adapter;
  const json body = {
      {"candidates", {{{"content", {{"parts", {{{"text", "ok"}}, {{"inlineData", {{"data", base64_encode({1, 2, 3})}}}}}}}}}}},
      {"usageMetadata",
       {{"promptTokenCount", 600},
        {"candidatesTokensDetails", {{{"modality", "TEXT"}, {"tokenCount", 12}}, {{"modality", "IMAGE"}, {"tokenCount", 1290}}}}}}};
  const auto r = adapter.parse_response(body.dump());
  EXPECT_EQ(r.image_png, (std::vector<std::uint8_t>{1, 2, 3}));
  EXPECT_EQ(r.usage, (TokenUsage{600, 12, 1290}));
  EXPECT_THROW(adapter.parse_response(R"({"candidates":[]})"), BackendError);
  EXPECT_THROW(adapter.parse_response("not json"), BackendError);
}

TEST(HttpBackend, TalksToFakeServer) {
  TempDir dir;
  const auto pool = make_pool(dir / "refs", 4);
  const auto png = encode_png(synthaug::testing::noise_image(8, 8, 1));
  ::setenv("SYNTHAUG_TEST_KEY", "secret-123", 1);

  httplib::Server server;
  std::mutex mu;
  json seen;
  std::string seen_key;
  int calls = 0;
  // httplib reads a colon in a route as a path parameter, hence the dot.
  server.Post(R"(/v1beta/models/image-model.generateContent)", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    if (calls++ == 0) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    seen = json::parse(req.body);
    seen_key = req.get_header_value("x-goog-api-key");
    const json out = {{"candidates", {{{"content", {{"parts", {{{"inlineData", {{"mimeType", "image/png"}, {"data", base64_encode(png)}}}}}}}}}}},
                      {"usageMetadata", {{"promptTokenCount", 1}, {"candidatesTokensDetails", {{{"modality", "IMAGE"}, {"tokenCount", 1120}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpGeneratorBackend backend({"http://127.0.0.1:" + std::to_string(port), "image-model", "SYNTHAUG_TEST_KEY", 5}, nullptr);
  GenerationRequest req;
  req.prompt_text = "make damage";
  const auto& ids = pool.ids.at(DefectClass::kGlaze);
  req.references = {pool.image(ids[0]), pool.image(ids[1])};
  EXPECT_THROW(backend.generate(req), BackendError);  // 503
  GenerationResult r;
  std::string error;
  try {
    r = backend.generate(req);
  } catch (const std::exception& e) {
    error = e.what();
  }
  server.stop();
  t.join();
  ASSERT_EQ(error, "");

  EXPECT_EQ(r.image_png, png);
  EXPECT_EQ(r.usage.output_image_tokens, 1120);
  EXPECT_EQ(seen_key, "secret-123");
  const auto& parts = seen.at("contents").at(0).at("parts");
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].at("text"), "make damage");
  const std::string ref = read_text_file(req.references[0].path);
  EXPECT_EQ(base64_decode(parts[1].at("inline_data").at("data").get<std::string>()),
            std::vector<std::uint8_t>(ref.begin(), ref.end()));
}

TEST(HttpBackend, RequiresEndpointAndModel) {
  EXPECT_THROW(HttpGeneratorBackend({"", "m", "K", 1}, nullptr), ConfigError);
  EXPECT_THROW(HttpGeneratorBackend({"http://x", "", "K", 1}, nullptr), ConfigError);
}

}  // namespace
