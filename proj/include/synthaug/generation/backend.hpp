#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "synthaug/common/types.hpp"
#include "synthaug/generation/candidate.hpp"

namespace synthaug::generation {

struct ReferenceImage {
  std::string image_id;
  std::filesystem::path path;
};

struct GenerationRequest {
  DefectClass defect_class = DefectClass::kShell;
  std::string prompt_text;
  std::vector<ReferenceImage> references;
  // Per-request seed; backends that can be seeded must be deterministic in it.
  std::uint64_t seed = 0;
};

struct GenerationResult {
  std::vector<std::uint8_t> image_png;
  TokenUsage usage;
};

struct GeneratorCapabilities {
  int max_references = 2;
  // Edge length of produced images in pixels; 0 when the backend decides.
  int image_size = 0;
};

// Produces one image per call. Implementations must tolerate concurrent calls.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string name() const = 0;
  virtual GeneratorCapabilities capabilities() const = 0;
  // Throws BackendError on failure; the orchestrator owns retries.
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

enum class MockComposite { kAlphaBlend, kSeam };
std::string_view to_string(MockComposite m);
MockComposite parse_mock_composite(std::string_view s);

// Offline backend: combines the reference crops (alpha blend, or a feathered
// seam collage that keeps local detail at full contrast), then applies a
// seeded geometric jitter and color shift. Output is a pure function of
// (reference bytes, seed).
class MockGeneratorBackend final : public GeneratorBackend {
 public:
  explicit MockGeneratorBackend(int image_size = 96, MockComposite composite = MockComposite::kAlphaBlend)
      : image_size_(image_size), composite_(composite) {}

  std::string name() const override { return "mock"; }
  GeneratorCapabilities capabilities() const override { return {2, image_size_}; }
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  int image_size_;
  MockComposite composite_;
};

struct HttpGeneratorConfig {
  // Scheme, host and optional port, e.g. "https://generativelanguage.googleapis.com".
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the API key.
  std::string api_key_env = "GENERATOR_API_KEY";
  int timeout_seconds = 120;
};

// Translates between GenerationRequest and one vendor's wire schema.
class RequestAdapter {
 public:
  virtual ~RequestAdapter() = default;
  virtual std::string path(const HttpGeneratorConfig& config) const = 0;
  virtual std::vector<std::pair<std::string, std::string>> headers(const std::string& api_key) const = 0;
  virtual std::string build_body(const GenerationRequest& request,
                                 const std::vector<std::vector<std::uint8_t>>& reference_bytes) const = 0;
  virtual GenerationResult parse_response(const std::string& body) const = 0;
};

// generateContent-style schema: text part plus inline base64 image parts in,
// inline image part and usage metadata split by modality out.
class GenerateContentAdapter final : public RequestAdapter {
 public:
  std::string path(const HttpGeneratorConfig& config) const override;
  std::vector<std::pair<std::string, std::string>> headers(const std::string& api_key) const override;
  std::string build_body(const GenerationRequest& request,
                         const std::vector<std::vector<std::uint8_t>>& reference_bytes) const override;
  GenerationResult parse_response(const std::string& body) const override;
};

class HttpGeneratorBackend final : public GeneratorBackend {
 public:
  HttpGeneratorBackend(HttpGeneratorConfig config, std::unique_ptr<RequestAdapter> adapter);

  std::string name() const override { return "http:" + config_.model; }
  GeneratorCapabilities capabilities() const override { return {2, 0}; }
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  HttpGeneratorConfig config_;
  std::unique_ptr<RequestAdapter> adapter_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace synthaug::generation
