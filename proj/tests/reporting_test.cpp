#include <gtest/gtest.h>

#include "support.hpp"
#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"
#include "synthaug/reporting/report.hpp"

namespace {

using namespace synthaug;
using namespace synthaug::reporting;
using synthaug::testing::TempDir;

// Requests / rejected per batch and the displayed rejection percentage, with
// 52 accepted per class as the target of every batch.
struct PublishedRow {
  const char* batch;
  const char* prompt;
  std::int64_t requests;
  std::int64_t rejected;
  const char* percent;
};
constexpr PublishedRow kPublishedRows[] = {
    {"0", "V1", 104, 0, "0.0%"}, {"1", "V1", 106, 2, "1.9%"}, {"2", "V1", 107, 3, "2.9%"},
    {"3", "V2", 107, 3, "2.9%"}, {"4", "V2", 112, 8, "7.7%"}, {"5", "V2", 108, 4, "3.8%"},
    {"6", "V2", 106, 2, "1.9%"}, {"7", "V2", 106, 2, "1.9%"},
};

std::vector<BatchSummary> published_batches() {
  std::vector<BatchSummary> out;
  for (const auto& r : kPublishedRows) out.push_back({r.batch, r.prompt, r.requests, r.rejected, 104, 0, std::nullopt});
  return out;
}

TEST(RejectionTable, ReproducesPublishedPercentages) {
  const auto batches = published_batches();
  const auto table = rejection_table(batches);
  ASSERT_EQ(table.rows.size(), 8u);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    EXPECT_EQ(format_percent_tenths(table.rows[i].rejection_tenths), kPublishedRows[i].percent) << "batch " << i;
    EXPECT_FALSE(table.rows[i].flagged);
  }
  EXPECT_EQ(table.total.requests, 856);
  EXPECT_EQ(table.total.rejected, 24);
  EXPECT_EQ(table.total.target, 832);
  EXPECT_EQ(format_percent_tenths(table.total.rejection_tenths), "2.9%");
}

TEST(RejectionTable, PendingBatchIsFlaggedNotFatal) {
  std::vector<BatchSummary> batches{{"b", "V2", 10, 1, 8, 2, std::nullopt}};
  const auto table = rejection_table(batches);
  EXPECT_TRUE(table.rows[0].flagged);
  EXPECT_EQ(table.rows[0].note, "2 pending");
  EXPECT_TRUE(table.total.flagged);
}

TEST(RejectionTenths, HalfUpAndErrors) {
  EXPECT_EQ(rejection_tenths(0, 104), 0);
  EXPECT_EQ(rejection_tenths(8, 104), 77);
  EXPECT_EQ(rejection_tenths(1, 2000), 1);   // 0.05% rounds up
  EXPECT_EQ(rejection_tenths(1, 8), 125);    // 12.5% exactly
  EXPECT_EQ(rejection_tenths(1, 16), 63);    // 6.25% -> 6.3%
  EXPECT_EQ(format_percent_tenths(125), "12.5%");
  EXPECT_THROW(rejection_tenths(1, 0), DataError);
  EXPECT_THROW(rejection_tenths(-1, 10), DataError);
}

TEST(RejectionTenths, PropertyMatchesLongDivisionOracle) {
  Rng rng(77);
  for (int i = 0; i < 5000; ++i) {
    const auto target = static_cast<std::int64_t>(1 + uniform_index(rng, 5000));
    const auto rejected = static_cast<std::int64_t>(uniform_index(rng, 3 * static_cast<std::uint64_t>(target)));
    // Oracle: truncate, then round up when the remainder is at least half.
    std::int64_t tenths = rejected * 1000 / target;
    const std::int64_t remainder = rejected * 1000 - tenths * target;
    if (2 * remainder >= target) ++tenths;
    EXPECT_EQ(rejection_tenths(rejected, target), tenths) << rejected << "/" << target;
  }
}

TEST(Cost, PublishedImageRate) {
  const std::vector<UsageRecord> recs{{"r", "b", 0, 0, 1'000'000}};
  EXPECT_EQ(format_usd(compute_cost(recs).total.cost_pico), "$120.00");
}

TEST(Cost, ConstructedMixedCase) {
  const std::vector<UsageRecord> recs{{"r", "b", 100'000, 10'000, 50'000}};
  const auto report = compute_cost(recs);
  EXPECT_EQ(format_usd(report.total.cost_pico), "$6.32");
  EXPECT_EQ(report.total.cost_pico, 6'320'000'000'000);
}

TEST(Cost, ZeroUsage) {
  const std::vector<UsageRecord> recs{{"r", "b", 0, 0, 0}};
  EXPECT_EQ(format_usd(compute_cost(recs).total.cost_pico), "$0.00");
  EXPECT_EQ(format_usd(compute_cost({}).total.cost_pico), "$0.00");
}

TEST(Cost, NegativeCounterNamesRecord) {
  const std::vector<UsageRecord> recs{{"cand-42", "b", 1, -1, 0}};
  try {
    compute_cost(recs);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("cand-42"), std::string::npos);
  }
}

TEST(Cost, RowsPerBatchInFirstAppearanceOrder) {
  const std::vector<UsageRecord> recs{{"1", "b2", 10, 0, 1120}, {"2", "b1", 10, 0, 1120}, {"3", "b2", 10, 0, 1120}};
  const auto report = compute_cost(recs);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].batch_id, "b2");
  EXPECT_EQ(report.rows[0].requests, 2);
  EXPECT_EQ(report.total.requests, 3);
  EXPECT_EQ(report.total.output_image_tokens, 3360);
}

TEST(Cost, PropertyLinearOverDisjointSets) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<UsageRecord> a, b, both;
    for (int i = 0; i < 1 + static_cast<int>(uniform_index(rng, 30)); ++i) {
      UsageRecord r{"r" + std::to_string(i), "b" + std::to_string(uniform_index(rng, 3)),
                    static_cast<std::int64_t>(uniform_index(rng, 100000)),
                    static_cast<std::int64_t>(uniform_index(rng, 1000)),
                    static_cast<std::int64_t>(uniform_index(rng, 5000))};
      (bernoulli(rng, 0.5) ? a : b).push_back(r);
      both.push_back(r);
    }
    PricingSchedule s{uniform_index(rng, 500) / 100.0, uniform_index(rng, 5000) / 100.0, uniform_index(rng, 50000) / 100.0};
    EXPECT_EQ(compute_cost(both, s).total.cost_pico, compute_cost(a, s).total.cost_pico + compute_cost(b, s).total.cost_pico);
  }
}

TEST(Cost, FormatHalfUpToCent) {
  EXPECT_EQ(format_usd(5'000'000'000), "$0.01");  // half a cent
  EXPECT_EQ(format_usd(4'999'999'999), "$0.00");
  EXPECT_EQ(format_usd(14'140'000'000'000), "$14.14");
}

TEST(Pricing, ValidationAndJson) {
  PricingSchedule p;
  EXPECT_NO_THROW(p.validate());
  p.usd_per_million_input_tokens = -1;
  EXPECT_THROW(p.validate(), ConfigError);
  const auto back = pricing_from_json(to_json(PricingSchedule{}));
  EXPECT_DOUBLE_EQ(back.usd_per_million_output_image_tokens, 120.0);
}

TEST(Aggregate, SampleStdAndDisplay) {
  const std::vector<double> three{0.6, 0.7, 0.8};
  EXPECT_EQ(format_mean_std(aggregate_runs(three)), "0.700 ± 0.100");
  const std::vector<double> same{0.7, 0.7, 0.7};
  EXPECT_EQ(format_mean_std(aggregate_runs(same)), "0.700 ± 0.000");
  const std::vector<double> one{0.693};
  EXPECT_EQ(format_mean_std(aggregate_runs(one)), "0.693 ± 0.000");
  EXPECT_THROW(aggregate_runs({}), DataError);
  EXPECT_EQ(to_json(aggregate_runs(three)).at("std_convention"), "sample (n-1)");
}

TEST(Aggregate, SignedDeltas) {
  EXPECT_EQ(format_signed(0.0121), "+0.012");
  EXPECT_EQ(format_signed(-0.037), "-0.037");
  EXPECT_EQ(format_signed(-0.0001), "+0.000");
}

TEST(ReportFiles, CsvAndSummary) {
  TempDir dir;
  const auto batches = published_batches();
  const auto table = rejection_table(batches);
  write_rejections_csv(dir / "rejections.csv", table);
  const auto csv = read_text_file(dir / "rejections.csv");
  EXPECT_NE(csv.find("7.7%"), std::string::npos);
  EXPECT_NE(csv.find("Total"), std::string::npos);

  const std::vector<UsageRecord> recs{{"r", "b", 100'000, 10'000, 50'000}};
  const auto cost = compute_cost(recs);
  write_cost_csv(dir / "cost.csv", cost);
  EXPECT_NE(read_text_file(dir / "cost.csv").find("6.32"), std::string::npos);

  SummaryInputs in;
  in.cost = cost;
  in.rejections = table;
  in.diversity = {{"V2/dual_ref", 1.09}};
  const std::vector<double> runs{0.6, 0.7, 0.8};
  in.evaluations = {{"f10_real", aggregate_runs(runs)}};
  const auto md = render_summary_markdown(in);
  EXPECT_NE(md.find("0.700 ± 0.100"), std::string::npos);
  EXPECT_NE(md.find("2.9%"), std::string::npos);
  EXPECT_NE(md.find("1.09"), std::string::npos);
}

}  // namespace
