#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/reporting/report.hpp"
#include "synthaug/verification/review_store.hpp"
#include "synthaug/verification/service.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::verification;
using generation::CandidateDecision;
using synthaug::testing::TempDir;

BatchInfo info(const std::string& id, int target = 52) {
  return {id, "V2", prompts::PromptMode::kDualRef, target, 1};
}

SyntheticCandidate pending(const std::string& batch, std::uint64_t ordinal, DefectClass c,
                           std::optional<std::string> replaces = std::nullopt) {
  SyntheticCandidate s;
  s.candidate_id = generation::candidate_id_for(batch, ordinal);
  s.defect_class = c;
  s.reference_ids = {"r1", "r2"};
  s.prompt_version = "V2";
  s.batch_id = batch;
  s.ordinal = ordinal;
  s.image_path = "images/" + s.candidate_id + ".png";
  s.token_usage = {516, 10, 1120};
  s.replaces = std::move(replaces);
  return s;
}

Decision decide(const std::string& id, Verdict v) { return {id, v, "annotator-1", "", std::nullopt}; }

TEST(ReviewStore, FreshBatchIsAllZeros) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b0", 52));
  const auto p = store.batch_progress("b0");
  EXPECT_EQ(p.accepted + p.pending + p.rejected + p.requests, 0);
  EXPECT_EQ(p.rejection_rate, 0.0);
  EXPECT_NO_THROW(store.create_batch(info("b0", 52)));
  EXPECT_THROW(store.create_batch(info("b0", 10)), ConflictError);
}

TEST(ReviewStore, EnqueueIsIdempotentAndRefusesDecided) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b"));
  const auto c = pending("b", 0, DefectClass::kShell);
  store.add_candidate(c);
  EXPECT_THROW(store.add_candidate(c), ConflictError);
  store.enqueue(c.candidate_id);
  store.enqueue(c.candidate_id);
  ASSERT_TRUE(store.next_task("b").has_value());
  store.record_decision(decide(c.candidate_id, Verdict::kAccept));
  EXPECT_FALSE(store.next_task("b").has_value());
  EXPECT_THROW(store.enqueue(c.candidate_id), StateError);
}

TEST(ReviewStore, DecisionsAreWriteOnce) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b"));
  const auto c = pending("b", 0, DefectClass::kGlaze);
  store.add_candidate(c);
  EXPECT_THROW(store.record_decision(decide(c.candidate_id, Verdict::kAccept)), StateError);  // never enqueued
  store.enqueue(c.candidate_id);
  const auto accepted = store.record_decision(decide(c.candidate_id, Verdict::kAccept));
  EXPECT_EQ(accepted.decision, CandidateDecision::kAccepted);
  EXPECT_FALSE(accepted.decision_meta->timestamp.empty());
  EXPECT_THROW(store.record_decision(decide(c.candidate_id, Verdict::kReject)), ConflictError);
  EXPECT_EQ(store.find_candidate(c.candidate_id)->decision, CandidateDecision::kAccepted);
  EXPECT_THROW(store.record_decision(decide("nope", Verdict::kAccept)), NotFoundError);
  EXPECT_THROW(store.record_decision({c.candidate_id, Verdict::kAccept, "", "", std::nullopt}), ValidationError);
}

TEST(ReviewStore, RejectEmitsExactlyOneRegeneration) {
  TempDir dir;
  ReviewStore store(dir.path());
  std::vector<RegenerationTask> heard;
  store.on_regeneration([&](const RegenerationTask& t) { heard.push_back(t); });
  store.create_batch(info("b"));
  const auto c = pending("b", 0, DefectClass::kShell);
  store.add_candidate(c);
  store.enqueue(c.candidate_id);
  store.record_decision(decide(c.candidate_id, Verdict::kReject));
  ASSERT_EQ(heard.size(), 1u);
  EXPECT_EQ(heard[0].rejected_candidate_id, c.candidate_id);
  EXPECT_EQ(store.open_regeneration_tasks("b").size(), 1u);

  store.add_candidate(pending("b", 1, DefectClass::kShell, c.candidate_id));
  EXPECT_TRUE(store.open_regeneration_tasks("b").empty());
  EXPECT_THROW(store.add_candidate(pending("b", 2, DefectClass::kShell, c.candidate_id)), ConflictError);
  EXPECT_EQ(store.emitted_regeneration_tasks("b").size(), 1u);
}

TEST(ReviewStore, ProgressMatchesPublishedRates) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b", 52));
  for (int i = 0; i < 107; ++i) {
    const auto c = pending("b", static_cast<std::uint64_t>(i), i % 2 ? DefectClass::kGlaze : DefectClass::kShell);
    store.add_candidate(c);
    store.enqueue(c.candidate_id);
    store.record_decision(decide(c.candidate_id, i < 3 ? Verdict::kReject : Verdict::kAccept));
  }
  const auto p = store.batch_progress("b");
  EXPECT_EQ(p.requests, 107);
  EXPECT_EQ(p.rejected, 3);
  EXPECT_NEAR(p.rejection_rate, 3.0 / 104.0, 1e-15);
  EXPECT_EQ(reporting::format_percent_tenths(reporting::rejection_tenths(p.rejected, p.info.target_total())), "2.9%");
}

TEST(ReviewStore, PropertyCountsConservedAndReplayIdentical) {
  TempDir dir;
  Rng rng(31);
  {
    ReviewStore store(dir.path());
    store.create_batch(info("b", 20));
    std::vector<std::string> undecided;
    std::uint64_t ordinal = 0;
    int enqueued = 0;
    for (int step = 0; step < 400; ++step) {
      if (undecided.empty() || bernoulli(rng, 0.5)) {
        const auto c = pending("b", ordinal++, bernoulli(rng, 0.5) ? DefectClass::kShell : DefectClass::kGlaze);
        store.add_candidate(c);
        store.enqueue(c.candidate_id);
        ++enqueued;
        undecided.push_back(c.candidate_id);
      } else {
        const auto i = uniform_index(rng, undecided.size());
        store.record_decision(decide(undecided[i], bernoulli(rng, 0.2) ? Verdict::kReject : Verdict::kAccept));
        undecided.erase(undecided.begin() + static_cast<std::ptrdiff_t>(i));
      }
      const auto p = store.batch_progress("b");
      ASSERT_EQ(p.accepted + p.rejected + p.pending, enqueued);
      ASSERT_EQ(static_cast<int>(store.emitted_regeneration_tasks("b").size()), p.rejected);
    }
  }
  ReviewStore live(dir.path());
  const auto before = live.candidates("b");
  ReviewStore replayed(dir.path());
  EXPECT_EQ(replayed.candidates("b"), before);
  EXPECT_EQ(to_json(replayed.batch_progress("b")).dump(), to_json(live.batch_progress("b")).dump());
}

TEST(ReviewStore, NextTaskIsFifo) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b"));
  for (std::uint64_t i = 0; i < 3; ++i) {
    store.add_candidate(pending("b", i, DefectClass::kShell));
    store.enqueue(generation::candidate_id_for("b", i));
  }
  EXPECT_EQ(store.next_task("b")->candidate_id, generation::candidate_id_for("b", 0));
  store.record_decision(decide(generation::candidate_id_for("b", 0), Verdict::kAccept));
  EXPECT_EQ(store.next_task("b")->candidate_id, generation::candidate_id_for("b", 1));
  EXPECT_THROW(store.next_task("missing"), NotFoundError);
}

TEST(ReviewStore, ConcurrentDecisionsOneWinner) {
  TempDir dir;
  ReviewStore store(dir.path());
  store.create_batch(info("b"));
  const auto c = pending("b", 0, DefectClass::kShell);
  store.add_candidate(c);
  store.enqueue(c.candidate_id);
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      try {
        store.record_decision(decide(c.candidate_id, i % 2 ? Verdict::kAccept : Verdict::kReject));
        ++ok;
      } catch (const ConflictError&) {
        ++conflict;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(conflict.load(), 7);
}

// ---------------------------------------------------------------- service

struct ServiceFixture : ::testing::Test {
  TempDir dir;
  std::unique_ptr<ReviewStore> store;
  std::unique_ptr<VerificationService> service;
  std::unique_ptr<httplib::Client> client;

  void SetUp() override {
    store = std::make_unique<ReviewStore>(dir / "review");
    store->create_batch(info("b", 2));
    for (std::uint64_t i = 0; i < 2; ++i) {
      auto c = pending("b", i, DefectClass::kShell);
      fs::create_directories(dir / "review/b/images");
      synthaug::write_text_file(dir / "review/b" / c.image_path, "png-bytes");
      store->add_candidate(c);
      store->enqueue(c.candidate_id);
    }
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.real_records = synthaug::testing::write_record_images(dir / "real", 10, 3, 1);
    cfg.default_page_size = 4;
    service = std::make_unique<VerificationService>(*store, cfg);
    const int port = service->start_background();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { service->stop(); }

  httplib::Result post_decision(const std::string& id, const json& body) {
    return client->Post("/api/candidates/" + id + "/decision", body.dump(), "application/json");
  }
};

TEST_F(ServiceFixture, NextTaskThenDecisionThenConflict) {
  auto res = client->Get("/api/batches/b/next-task");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto body = json::parse(res->body);
  const auto id = body.at("task").at("candidate_id").get<std::string>();
  EXPECT_EQ(body.at("task").at("reference_image_urls").size(), 2u);

  auto img = client->Get(body.at("task").at("candidate_image_url").get<std::string>());
  ASSERT_TRUE(img);
  EXPECT_EQ(img->body, "png-bytes");

  auto first = post_decision(id, {{"verdict", "accept"}, {"annotator", "ann"}});
  ASSERT_TRUE(first);
  EXPECT_EQ(first->status, 200);
  EXPECT_EQ(json::parse(first->body).at("progress").at("accepted"), 1);
  auto second = post_decision(id, {{"verdict", "reject"}, {"annotator", "ann"}});
  ASSERT_TRUE(second);
  EXPECT_EQ(second->status, 409);
  EXPECT_EQ(store->find_candidate(id)->decision, CandidateDecision::kAccepted);
}

TEST_F(ServiceFixture, BadRequestsAndUnknowns) {
  EXPECT_EQ(post_decision("x", {{"verdict", "maybe"}, {"annotator", "a"}})->status, 400);
  EXPECT_EQ(post_decision("x", {{"verdict", "accept"}, {"annotator", "a"}, {"extra", 1}})->status, 400);
  EXPECT_EQ(post_decision("x", {{"verdict", "accept"}, {"annotator", "a"}})->status, 404);
  EXPECT_EQ(client->Get("/api/batches/zzz/next-task")->status, 404);
  EXPECT_EQ(client->Get("/api/real/cracked")->status, 404);
  EXPECT_EQ(client->Get("/images/batches/..%2F..%2Fetc/images/passwd")->status / 100, 4);
}

TEST_F(ServiceFixture, DrainedBatchReturnsNullTaskWithFinalRate) {
  for (int i = 0; i < 2; ++i) {
    const auto id = json::parse(client->Get("/api/batches/b/next-task")->body).at("task").at("candidate_id").get<std::string>();
    ASSERT_EQ(post_decision(id, {{"verdict", i == 0 ? "reject" : "accept"}, {"annotator", "a"}})->status, 200);
  }
  const auto body = json::parse(client->Get("/api/batches/b/next-task")->body);
  EXPECT_TRUE(body.at("task").is_null());
  EXPECT_EQ(body.at("progress").at("rejected"), 1);
  EXPECT_DOUBLE_EQ(body.at("progress").at("rejection_rate").get<double>(), 0.25);
  const auto list = json::parse(client->Get("/api/batches")->body);
  EXPECT_EQ(list.at("batches").size(), 1u);
}

TEST_F(ServiceFixture, RealFeedPaginates) {
  // 10 groups alternate classes, 3 views each: 15 shell images.
  const auto p0 = json::parse(client->Get("/api/real/shell")->body);
  EXPECT_EQ(p0.at("total"), 15);
  EXPECT_EQ(p0.at("items").size(), 4u);
  const auto last = json::parse(client->Get("/api/real/shell?page=3&page_size=4")->body);
  EXPECT_EQ(last.at("items").size(), 3u);
  const auto beyond = json::parse(client->Get("/api/real/shell?page=9")->body);
  EXPECT_TRUE(beyond.at("items").empty());
  EXPECT_EQ(client->Get("/api/real/shell?page=-1")->status, 400);
  const auto url = p0.at("items").at(0).at("url").get<std::string>();
  const auto img = client->Get(url);
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
}

}  // namespace
