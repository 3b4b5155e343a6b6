#include <cstdlib>

#include <gtest/gtest.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/pipeline/config.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::pipeline;
using synthaug::testing::TempDir;

TEST(PipelineConfig, DefaultsHaveEightDualBatches) {
  const auto c = parse_pipeline_config(json::object(), "/cfg");
  ASSERT_EQ(c.generation.batches.size(), 8u);
  EXPECT_EQ(c.generation.batches[2].prompt_version, "V1");
  EXPECT_EQ(c.generation.batches[3].prompt_version, "V2");
  EXPECT_EQ(c.generator.api_key_env, "GENERATOR_API_KEY");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(c.split.test, 0.2);
}

TEST(PipelineConfig, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_THROW(parse_pipeline_config(json{{"sede", 1}}, "/cfg"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(json{{"generator", {{"backend", "mock"}, {"apikey", "x"}}}}, "/cfg"),
               ConfigError);
  EXPECT_THROW(parse_pipeline_config(json{{"train", {{"epoch", 3}}}}, "/cfg"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(json{{"seed", "zero"}}, "/cfg"), ConfigError);
}

TEST(PipelineConfig, RelativePathsResolveAgainstConfigDir) {
  const json raw = {{"dataset", {{"annotations", "../data/a.jsonl"}, {"images_dir", "/abs/images"}}},
                    {"runs_root", "runs"}};
  const auto c = parse_pipeline_config(raw, "/work/configs");
  EXPECT_EQ(c.dataset.annotations, fs::path("/work/data/a.jsonl"));
  EXPECT_EQ(c.dataset.images_dir, fs::path("/abs/images"));
  EXPECT_EQ(c.runs_root, fs::path("/work/configs/runs"));
}

TEST(PipelineConfig, EnvironmentInterpolation) {
  ::setenv("SYNTHAUG_CFG_TEST_ROOT", "/data/x", 1);
  ::unsetenv("SYNTHAUG_CFG_TEST_UNSET");
  const auto c = parse_pipeline_config(json{{"runs_root", "${SYNTHAUG_CFG_TEST_ROOT}/runs"}}, "/cfg");
  EXPECT_EQ(c.runs_root, fs::path("/data/x/runs"));
  try {
    parse_pipeline_config(json{{"tag", "${SYNTHAUG_CFG_TEST_UNSET}"}}, "/cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("SYNTHAUG_CFG_TEST_UNSET"), std::string::npos);
  }
  EXPECT_THROW(interpolate_env(json("${OPEN")), ConfigError);
  // Non-string values pass through.
  EXPECT_EQ(interpolate_env(json{{"n", 3}}), (json{{"n", 3}}));
}

TEST(PipelineConfig, ToyConfigLoadsAndRoundTrips) {
  const fs::path toy = fs::path(SYNTHAUG_SOURCE_DIR) / "configs" / "toy.json";
  const auto c = load_pipeline_config(toy);
  EXPECT_EQ(c.generator.mock_composite, generation::MockComposite::kSeam);
  EXPECT_EQ(c.generation.batches.size(), 4u);
  EXPECT_EQ(c.selection.multiples, (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(c.dataset.annotations.is_absolute());
  const auto again = parse_pipeline_config(to_json(c), c.config_dir);
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(PipelineConfig, MissingFileIsConfigError) {
  TempDir dir;
  EXPECT_ANY_THROW(load_pipeline_config(dir / "nope.json"));
  write_text_file(dir / "bad.json", "{not json");
  EXPECT_THROW(load_pipeline_config(dir / "bad.json"), ConfigError);
}

}  // namespace
