#pragma once

// Cost accounting, rejection tables and seed aggregation.
//
// Money is exact: costs are integer pico-dollars. A rate of r USD per million
// tokens is held as r x 10^6 micro-dollars per million tokens, so
// tokens x rate_micro is the cost in pico-dollars with no rounding.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthaug/common/json_io.hpp"

namespace synthaug::reporting {

struct PricingSchedule {
  double usd_per_million_input_tokens = 2.0;
  double usd_per_million_output_text_tokens = 12.0;
  double usd_per_million_output_image_tokens = 120.0;

  // Throws ConfigError for a negative rate or one finer than 1e-6 USD.
  void validate() const;
};

json to_json(const PricingSchedule& p);
PricingSchedule pricing_from_json(const json& j);

struct UsageRecord {
  std::string record_id;
  std::string batch_id;
  std::int64_t input_tokens = 0;
  std::int64_t output_text_tokens = 0;
  std::int64_t output_image_tokens = 0;
};

struct CostRow {
  std::string batch_id;
  std::int64_t requests = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_text_tokens = 0;
  std::int64_t output_image_tokens = 0;
  std::int64_t cost_pico = 0;
};

struct CostReport {
  // In order of first appearance of each batch.
  std::vector<CostRow> rows;
  CostRow total;
};

// Throws DataError naming the record when a counter is negative.
CostReport compute_cost(std::span<const UsageRecord> records, const PricingSchedule& schedule = {});

std::int64_t cost_pico(const UsageRecord& r, const PricingSchedule& schedule = {});

// "$6.32": half-up to the cent.
std::string format_usd(std::int64_t pico);

struct BatchSummary {
  std::string batch_id;
  std::string prompt;
  std::int64_t requests = 0;
  std::int64_t rejected = 0;
  std::int64_t target = 0;
  std::int64_t pending = 0;
  std::optional<std::int64_t> cost_pico;
};

struct RejectionRow {
  std::string batch;
  std::string prompt;
  std::int64_t requests = 0;
  std::int64_t rejected = 0;
  std::int64_t target = 0;
  // Rejection percentage in tenths of a percent, half-up.
  std::int64_t rejection_tenths = 0;
  std::optional<std::int64_t> cost_pico;
  // Set for batches that still have pending candidates.
  bool flagged = false;
  std::string note;
};

struct RejectionTable {
  std::vector<RejectionRow> rows;
  RejectionRow total;
};

// rejected / target in tenths of a percent, rounded half-up with integer
// arithmetic. Throws DataError for target <= 0 or negative counts.
std::int64_t rejection_tenths(std::int64_t rejected, std::int64_t target);
std::string format_percent_tenths(std::int64_t tenths);

RejectionTable rejection_table(std::span<const BatchSummary> batches);

struct Aggregate {
  double mean = 0.0;
  // Sample standard deviation (n - 1); 0 for a single run.
  double std = 0.0;
  std::vector<double> values;
};

// Throws DataError on empty input.
Aggregate aggregate_runs(std::span<const double> values);

// "0.700 ± 0.100"
std::string format_mean_std(const Aggregate& a, int decimals = 3);
// "+0.012" / "-0.037"
std::string format_signed(double v, int decimals = 3);

json to_json(const Aggregate& a);

void write_cost_csv(const std::filesystem::path& path, const CostReport& report);
void write_rejections_csv(const std::filesystem::path& path, const RejectionTable& table);

struct SummaryInputs {
  std::optional<CostReport> cost;
  std::optional<RejectionTable> rejections;
  // Rows of (label, diversity ratio).
  std::vector<std::pair<std::string, double>> diversity;
  // Rows of (label, aggregate F1) for evaluation runs.
  std::vector<std::pair<std::string, Aggregate>> evaluations;
  // Extra free-form markdown appended at the end.
  std::string extra_markdown;
};

std::string render_summary_markdown(const SummaryInputs& in);

}  // namespace synthaug::reporting
