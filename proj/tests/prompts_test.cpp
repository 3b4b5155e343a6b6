#include <thread>

#include <gtest/gtest.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"
#include "synthaug/prompts/registry.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::prompts;
using synthaug::testing::TempDir;

const fs::path kFixtures = fs::path(SYNTHAUG_TEST_FIXTURES) / "prompts";

TEST(DefaultPrompts, MatchFixtureTextsByteForByte) {
  const auto defaults = default_templates();
  ASSERT_EQ(defaults.size(), 6u);
  for (const auto& t : defaults) {
    const auto file = kFixtures / std::string(synthaug::to_string(t.defect_class)) /
                      (t.version + "_" + std::string(to_string(t.mode)) + ".txt");
    ASSERT_TRUE(fs::exists(file)) << file;
    EXPECT_EQ(t.text, read_text_file(file)) << t.id();
  }
}

TEST(DefaultPrompts, KnownPhrases) {
  const auto r = PromptRegistry::with_defaults();
  EXPECT_NE(r.get(DefectClass::kGlaze, "V2", PromptMode::kDualRef).text.find("MANDATORY: Each damage patch MUST"),
            std::string::npos);
  EXPECT_NE(r.get(DefectClass::kShell, "V2", PromptMode::kDualRef).text.find("roughly 30-70% of the rim area"),
            std::string::npos);
}

TEST(DefaultPrompts, RequiredClausesOfV2) {
  const auto r = PromptRegistry::with_defaults();
  for (auto mode : {PromptMode::kDualRef, PromptMode::kSingleRef}) {
    EXPECT_EQ(r.get(DefectClass::kGlaze, "V2", mode).required_clauses, (std::vector<std::string>{"white", "FLUSH"}));
    EXPECT_EQ(r.get(DefectClass::kShell, "V2", mode).required_clauses, (std::vector<std::string>{"30-70"}));
  }
}

TEST(Registry, UnknownVersionListsAvailable) {
  const auto r = PromptRegistry::with_defaults();
  try {
    r.get(DefectClass::kShell, "V9", PromptMode::kDualRef);
    FAIL();
  } catch (const LookupError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("V1"), std::string::npos);
    EXPECT_NE(msg.find("V2"), std::string::npos);
  }
}

TEST(Registry, RegisterNewVersion) {
  auto r = PromptRegistry::with_defaults();
  PromptTemplate t{DefectClass::kShell, "V3", PromptMode::kDualRef, "Bigger bites, 30-70% of the rim.", {"30-70"}};
  EXPECT_EQ(r.register_prompt(t), "shell/V3/dual_ref");
  EXPECT_EQ(r.get(DefectClass::kShell, "V3", PromptMode::kDualRef).text, t.text);
  EXPECT_EQ(r.versions(DefectClass::kShell, PromptMode::kDualRef), (std::vector<std::string>{"V1", "V2", "V3"}));
}

TEST(Registry, MissingClauseIsValidationError) {
  auto r = PromptRegistry::with_defaults();
  PromptTemplate t{DefectClass::kGlaze, "V3", PromptMode::kDualRef, "Matte patches.", {"white", "FLUSH"}};
  EXPECT_THROW(r.register_prompt(t), ValidationError);
  t.text.clear();
  t.required_clauses.clear();
  EXPECT_THROW(r.register_prompt(t), ValidationError);
  EXPECT_EQ(r.size(), 6u);
}

TEST(Registry, ReRegisterIsConflictAndOriginalStands) {
  auto r = PromptRegistry::with_defaults();
  const auto before = r.get(DefectClass::kShell, "V2", PromptMode::kDualRef);
  PromptTemplate t = before;
  t.text += "\nextra";
  EXPECT_THROW(r.register_prompt(t), ConflictError);
  EXPECT_EQ(r.get(DefectClass::kShell, "V2", PromptMode::kDualRef).text, before.text);
}

TEST(Registry, ReturnedTemplatesAreCopies) {
  const auto r = PromptRegistry::with_defaults();
  auto t = r.get(DefectClass::kGlaze, "V1", PromptMode::kDualRef);
  const auto original = t.text;
  t.text = "changed";
  EXPECT_EQ(r.get(DefectClass::kGlaze, "V1", PromptMode::kDualRef).text, original);
}

TEST(Registry, SaveLoadRoundTripAndWriteBack) {
  TempDir dir;
  auto r = PromptRegistry::with_defaults();
  r.save(dir.path());
  EXPECT_TRUE(fs::exists(dir / "glaze/V2_dual_ref.txt"));
  EXPECT_TRUE(fs::exists(dir / "index.json"));

  auto loaded = PromptRegistry::load(dir.path());
  EXPECT_EQ(loaded.size(), 6u);
  for (const auto& t : default_templates()) {
    const auto got = loaded.get(t.defect_class, t.version, t.mode);
    EXPECT_EQ(got.text, t.text);
    EXPECT_EQ(got.required_clauses, t.required_clauses);
  }
  loaded.register_prompt({DefectClass::kGlaze, "V3", PromptMode::kSingleRef, "white and FLUSH", {"white"}});
  EXPECT_EQ(PromptRegistry::load(dir.path()).size(), 7u);
}

TEST(Registry, LoadWithoutIndexNamesTheFile) {
  TempDir dir;
  EXPECT_THROW(PromptRegistry::load(dir.path()), MissingArtifactError);
}

TEST(Registry, ConcurrentReadsDuringRegistration) {
  auto r = PromptRegistry::with_defaults();
  std::vector<std::thread> readers;
  std::atomic<int> hits{0};
  for (int i = 0; i < 4; ++i) {
    readers.emplace_back([&] {
      for (int k = 0; k < 500; ++k) {
        if (!r.get(DefectClass::kShell, "V2", PromptMode::kDualRef).text.empty()) ++hits;
      }
    });
  }
  for (int v = 3; v < 40; ++v) {
    r.register_prompt({DefectClass::kShell, "V" + std::to_string(v), PromptMode::kDualRef, "30-70", {"30-70"}});
  }
  for (auto& t : readers) t.join();
  EXPECT_EQ(hits.load(), 2000);
  EXPECT_EQ(r.size(), 6u + 37u);
}

}  // namespace
