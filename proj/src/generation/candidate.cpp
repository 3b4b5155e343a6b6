#include "synthaug/generation/candidate.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/random.hpp"

namespace synthaug::generation {

std::string_view to_string(CandidateDecision d) {
  switch (d) {
    case CandidateDecision::kPending:
      return "pending";
    case CandidateDecision::kAccepted:
      return "accepted";
    case CandidateDecision::kRejected:
      return "rejected";
  }
  return "unknown";
}

CandidateDecision parse_candidate_decision(std::string_view s) {
  if (s == "pending") return CandidateDecision::kPending;
  if (s == "accepted") return CandidateDecision::kAccepted;
  if (s == "rejected") return CandidateDecision::kRejected;
  throw DataError("unknown candidate decision '" + std::string(s) + "'");
}

std::string candidate_id_for(std::string_view batch_id, std::uint64_t ordinal) {
  std::string key(batch_id);
  key += '#';
  key += std::to_string(ordinal);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "c%016llx",
                static_cast<unsigned long long>(splitmix64(fnv1a64(key))));
  return buf;
}

void check_invariants(const SyntheticCandidate& c) {
  const auto& refs = c.reference_ids;
  const int expected = prompts::reference_count(c.prompt_mode);
  if (static_cast<int>(refs.size()) != expected) {
    throw DataError("candidate " + c.candidate_id + " has " + std::to_string(refs.size()) +
                    " references, expected " + std::to_string(expected));
  }
  if (refs.size() == 2 && refs[0] == refs[1]) {
    throw DataError("candidate " + c.candidate_id + " uses the same reference twice");
  }
  if (c.decision != CandidateDecision::kPending && !c.decision_meta) {
    throw DataError("decided candidate " + c.candidate_id + " lacks decision metadata");
  }
  if (c.token_usage.input_tokens < 0 || c.token_usage.output_text_tokens < 0 ||
      c.token_usage.output_image_tokens < 0) {
    throw DataError("candidate " + c.candidate_id + " has a negative token counter");
  }
}

json to_json(const TokenUsage& u) {
  return json{{"input_tokens", u.input_tokens},
              {"output_text_tokens", u.output_text_tokens},
              {"output_image_tokens", u.output_image_tokens}};
}

TokenUsage token_usage_from_json(const json& j) {
  return TokenUsage{j.at("input_tokens").get<std::int64_t>(),
                    j.at("output_text_tokens").get<std::int64_t>(),
                    j.at("output_image_tokens").get<std::int64_t>()};
}

json to_json(const SyntheticCandidate& c) {
  json j{{"candidate_id", c.candidate_id},
         {"class", synthaug::to_string(c.defect_class)},
         {"reference_ids", c.reference_ids},
         {"prompt_version", c.prompt_version},
         {"prompt_mode", prompts::to_string(c.prompt_mode)},
         {"batch_id", c.batch_id},
         {"ordinal", c.ordinal},
         {"image_path", c.image_path},
         {"token_usage", to_json(c.token_usage)},
         {"decision", to_string(c.decision)}};
  if (c.decision_meta) {
    json meta{{"annotator", c.decision_meta->annotator}, {"timestamp", c.decision_meta->timestamp}};
    if (c.decision_meta->reason) meta["reason"] = *c.decision_meta->reason;
    j["decision_meta"] = meta;
  }
  if (c.replaces) j["replaces"] = *c.replaces;
  return j;
}

SyntheticCandidate candidate_from_json(const json& j) {
  SyntheticCandidate c;
  try {
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.defect_class = parse_defect_class(j.at("class").get<std::string>());
    c.reference_ids = j.at("reference_ids").get<std::vector<std::string>>();
    c.prompt_version = j.at("prompt_version").get<std::string>();
    c.prompt_mode = prompts::parse_prompt_mode(j.at("prompt_mode").get<std::string>());
    c.batch_id = j.at("batch_id").get<std::string>();
    c.ordinal = j.at("ordinal").get<std::uint64_t>();
    c.image_path = j.at("image_path").get<std::string>();
    c.token_usage = token_usage_from_json(j.at("token_usage"));
    c.decision = parse_candidate_decision(j.at("decision").get<std::string>());
    if (j.contains("decision_meta")) {
      const auto& m = j["decision_meta"];
      DecisionMeta meta{m.at("annotator").get<std::string>(), m.at("timestamp").get<std::string>(),
                        std::nullopt};
      if (m.contains("reason")) meta.reason = m["reason"].get<std::string>();
      c.decision_meta = meta;
    }
    if (j.contains("replaces")) c.replaces = j["replaces"].get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed candidate record: ") + e.what());
  }
  return c;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace synthaug::generation
