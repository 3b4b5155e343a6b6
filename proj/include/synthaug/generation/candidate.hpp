#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthaug/common/json_io.hpp"
#include "synthaug/common/types.hpp"
#include "synthaug/prompts/registry.hpp"

namespace synthaug::generation {

using ::synthaug::to_json;

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_text_tokens = 0;
  std::int64_t output_image_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_text_tokens += o.output_text_tokens;
    output_image_tokens += o.output_image_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

enum class CandidateDecision { kPending, kAccepted, kRejected };
std::string_view to_string(CandidateDecision d);
CandidateDecision parse_candidate_decision(std::string_view s);

struct DecisionMeta {
  std::string annotator;
  std::string timestamp;
  std::optional<std::string> reason;

  friend bool operator==(const DecisionMeta&, const DecisionMeta&) = default;
};

// One generated image and its full lineage.
struct SyntheticCandidate {
  std::string candidate_id;
  DefectClass defect_class = DefectClass::kShell;
  std::vector<std::string> reference_ids;
  std::string prompt_version;
  prompts::PromptMode prompt_mode = prompts::PromptMode::kDualRef;
  std::string batch_id;
  // Request ordinal within the batch; candidate ids derive from it.
  std::uint64_t ordinal = 0;
  // Relative to the batch directory.
  std::string image_path;
  TokenUsage token_usage;
  CandidateDecision decision = CandidateDecision::kPending;
  std::optional<DecisionMeta> decision_meta;
  // Id of the rejected candidate this one regenerates, if any.
  std::optional<std::string> replaces;

  friend bool operator==(const SyntheticCandidate&, const SyntheticCandidate&) = default;
};

// Stable content hash of (batch_id, ordinal), 16 hex digits prefixed "c".
std::string candidate_id_for(std::string_view batch_id, std::uint64_t ordinal);

// Throws DataError when the dual-reference or decision-meta invariant fails.
void check_invariants(const SyntheticCandidate& c);

json to_json(const TokenUsage& u);
TokenUsage token_usage_from_json(const json& j);
json to_json(const SyntheticCandidate& c);
SyntheticCandidate candidate_from_json(const json& j);

std::string utc_timestamp_now();

}  // namespace synthaug::generation
