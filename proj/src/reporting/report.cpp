#include "synthaug/reporting/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "synthaug/common/errors.hpp"

namespace synthaug::reporting {

namespace {

constexpr std::int64_t kPicoPerCent = 10'000'000'000;

std::int64_t rate_micro(double usd_per_million) { return std::llround(usd_per_million * 1e6); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string usd_plain(std::int64_t pico) {
  const std::string s = format_usd(pico);
  return s.substr(1);
}

}  // namespace

void PricingSchedule::validate() const {
  for (double r : {usd_per_million_input_tokens, usd_per_million_output_text_tokens,
                   usd_per_million_output_image_tokens}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("pricing rates must be finite and >= 0");
    if (std::abs(r * 1e6 - static_cast<double>(rate_micro(r))) > 1e-3) {
      throw ConfigError("pricing rates are limited to 1e-6 USD per million tokens");
    }
  }
}

json to_json(const PricingSchedule& p) {
  return {{"usd_per_million_input_tokens", p.usd_per_million_input_tokens},
          {"usd_per_million_output_text_tokens", p.usd_per_million_output_text_tokens},
          {"usd_per_million_output_image_tokens", p.usd_per_million_output_image_tokens}};
}

PricingSchedule pricing_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"usd_per_million_input_tokens", "usd_per_million_output_text_tokens",
                       "usd_per_million_output_image_tokens"},
                      "pricing");
  PricingSchedule p;
  p.usd_per_million_input_tokens = j.value("usd_per_million_input_tokens", p.usd_per_million_input_tokens);
  p.usd_per_million_output_text_tokens =
      j.value("usd_per_million_output_text_tokens", p.usd_per_million_output_text_tokens);
  p.usd_per_million_output_image_tokens =
      j.value("usd_per_million_output_image_tokens", p.usd_per_million_output_image_tokens);
  p.validate();
  return p;
}

std::int64_t cost_pico(const UsageRecord& r, const PricingSchedule& s) {
  if (r.input_tokens < 0 || r.output_text_tokens < 0 || r.output_image_tokens < 0) {
    throw DataError("negative token counter in usage record '" + r.record_id + "'");
  }
  return r.input_tokens * rate_micro(s.usd_per_million_input_tokens) +
         r.output_text_tokens * rate_micro(s.usd_per_million_output_text_tokens) +
         r.output_image_tokens * rate_micro(s.usd_per_million_output_image_tokens);
}

CostReport compute_cost(std::span<const UsageRecord> records, const PricingSchedule& schedule) {
  schedule.validate();
  CostReport report;
  report.total.batch_id = "Total";
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const auto cost = cost_pico(r, schedule);
    auto [it, inserted] = index.try_emplace(r.batch_id, report.rows.size());
    if (inserted) report.rows.push_back(CostRow{.batch_id = r.batch_id});
    for (CostRow* row : {&report.rows[it->second], &report.total}) {
      row->requests += 1;
      row->input_tokens += r.input_tokens;
      row->output_text_tokens += r.output_text_tokens;
      row->output_image_tokens += r.output_image_tokens;
      row->cost_pico += cost;
    }
  }
  return report;
}

std::string format_usd(std::int64_t pico) {
  const bool neg = pico < 0;
  const std::int64_t mag = neg ? -pico : pico;
  const std::int64_t cents = (mag + kPicoPerCent / 2) / kPicoPerCent;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s$%lld.%02lld", neg ? "-" : "", static_cast<long long>(cents / 100),
                static_cast<long long>(cents % 100));
  return buf;
}

std::int64_t rejection_tenths(std::int64_t rejected, std::int64_t target) {
  if (target <= 0) throw DataError("rejection rate needs a positive target count");
  if (rejected < 0) throw DataError("negative rejected count");
  return (2 * rejected * 1000 + target) / (2 * target);
}

std::string format_percent_tenths(std::int64_t tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

RejectionTable rejection_table(std::span<const BatchSummary> batches) {
  RejectionTable table;
  auto& total = table.total;
  total.batch = "Total";
  total.prompt = "---";
  bool all_costed = !batches.empty();
  std::int64_t cost_sum = 0;
  for (const auto& b : batches) {
    if (b.requests < 0 || b.pending < 0) throw DataError("negative count in batch '" + b.batch_id + "'");
    RejectionRow row;
    row.batch = b.batch_id;
    row.prompt = b.prompt;
    row.requests = b.requests;
    row.rejected = b.rejected;
    row.target = b.target;
    row.rejection_tenths = rejection_tenths(b.rejected, b.target);
    row.cost_pico = b.cost_pico;
    if (b.pending > 0) {
      row.flagged = true;
      row.note = std::to_string(b.pending) + " pending";
    }
    total.requests += b.requests;
    total.rejected += b.rejected;
    total.target += b.target;
    total.flagged = total.flagged || row.flagged;
    if (b.cost_pico) {
      cost_sum += *b.cost_pico;
    } else {
      all_costed = false;
    }
    table.rows.push_back(std::move(row));
  }
  if (total.target > 0) total.rejection_tenths = rejection_tenths(total.rejected, total.target);
  if (all_costed) total.cost_pico = cost_sum;
  if (total.flagged) total.note = "includes batches with pending candidates";
  return table;
}

Aggregate aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot aggregate an empty set of runs");
  Aggregate a;
  a.values.assign(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / (n - 1.0));
  }
  return a;
}

std::string format_mean_std(const Aggregate& a, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f ± %.*f", decimals, a.mean, decimals, a.std);
  return buf;
}

std::string format_signed(double v, int decimals) {
  char buf[64];
  // Keep "+0.000" rather than "-0.000" for values that round to zero.
  const double scale = std::pow(10.0, decimals);
  if (std::round(v * scale) == 0.0) v = 0.0;
  std::snprintf(buf, sizeof(buf), "%+.*f", decimals, v);
  return buf;
}

json to_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"std", a.std}, {"n", a.values.size()}, {"values", a.values},
          {"std_convention", "sample (n-1)"}};
}

void write_cost_csv(const std::filesystem::path& path, const CostReport& report) {
  std::ostringstream out;
  out << "Batch,Requests,Input tokens,Output text tokens,Output image tokens,Cost (USD)\n";
  auto line = [&](const CostRow& r) {
    out << csv_field(r.batch_id) << ',' << r.requests << ',' << r.input_tokens << ',' << r.output_text_tokens
        << ',' << r.output_image_tokens << ',' << usd_plain(r.cost_pico) << '\n';
  };
  for (const auto& r : report.rows) line(r);
  line(report.total);
  write_text_file(path, out.str());
}

void write_rejections_csv(const std::filesystem::path& path, const RejectionTable& table) {
  std::ostringstream out;
  out << "Batch,Prompt,Requests,Rejected,Rejection %,Cost (USD),Note\n";
  auto line = [&](const RejectionRow& r) {
    out << csv_field(r.batch) << ',' << csv_field(r.prompt) << ',' << r.requests << ',' << r.rejected << ','
        << format_percent_tenths(r.rejection_tenths) << ',' << (r.cost_pico ? usd_plain(*r.cost_pico) : "")
        << ',' << csv_field(r.note) << '\n';
  };
  for (const auto& r : table.rows) line(r);
  line(table.total);
  write_text_file(path, out.str());
}

std::string render_summary_markdown(const SummaryInputs& in) {
  std::ostringstream out;
  out << "# Run summary\n\n";
  if (in.rejections) {
    out << "## Generation cost and rejection rates\n\n"
        << "| Batch | Prompt | Requests | Rejected | Rejection % | Cost (USD) |\n"
        << "|---|---|---|---|---|---|\n";
    auto line = [&](const RejectionRow& r, bool bold) {
      const std::string b = bold ? "**" : "";
      out << "| " << b << r.batch << b << " | " << r.prompt << " | " << r.requests << " | " << r.rejected
          << " | " << format_percent_tenths(r.rejection_tenths) << " | "
          << (r.cost_pico ? format_usd(*r.cost_pico) : "n/a") << (r.flagged ? " (" + r.note + ")" : "")
          << " |\n";
    };
    for (const auto& r : in.rejections->rows) line(r, false);
    line(in.rejections->total, true);
    out << "\nRejection % = rejected / target accepted count per batch.\n\n";
  } else if (in.cost) {
    out << "## Generation cost\n\n| Batch | Requests | Cost (USD) |\n|---|---|---|\n";
    for (const auto& r : in.cost->rows) {
      out << "| " << r.batch_id << " | " << r.requests << " | " << format_usd(r.cost_pico) << " |\n";
    }
    out << "| **Total** | " << in.cost->total.requests << " | " << format_usd(in.cost->total.cost_pico) << " |\n\n";
  }
  if (!in.diversity.empty()) {
    out << "## Diversity ratio\n\n| Set | Diversity Ratio |\n|---|---|\n";
    for (const auto& [label, ratio] : in.diversity) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", ratio);
      out << "| " << label << " | " << buf << " |\n";
    }
    out << '\n';
  }
  if (!in.evaluations.empty()) {
    out << "## Test F1\n\n| Configuration | Test F1 | Seeds |\n|---|---|---|\n";
    for (const auto& [label, agg] : in.evaluations) {
      out << "| " << label << " | " << format_mean_std(agg) << " | " << agg.values.size() << " |\n";
    }
    out << "\nMean ± sample standard deviation (n-1) over seeds.\n\n";
  }
  out << in.extra_markdown;
  return out.str();
}

}  // namespace synthaug::reporting
