#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"
#include "synthaug/generation/backend.hpp"

namespace synthaug::generation {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw BackendError("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw BackendError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string GenerateContentAdapter::path(const HttpGeneratorConfig& config) const {
  return "/v1beta/models/" + config.model + ":generateContent";
}

std::vector<std::pair<std::string, std::string>> GenerateContentAdapter::headers(
    const std::string& api_key) const {
  return {{"x-goog-api-key", api_key}};
}

std::string GenerateContentAdapter::build_body(
    const GenerationRequest& request, const std::vector<std::vector<std::uint8_t>>& reference_bytes) const {
  json parts = json::array();
  parts.push_back(json{{"text", request.prompt_text}});
  for (const auto& bytes : reference_bytes) {
    parts.push_back(json{{"inline_data", {{"mime_type", "image/png"}, {"data", base64_encode(bytes)}}}});
  }
  json body{{"contents", json::array({json{{"role", "user"}, {"parts", parts}}})},
            {"generationConfig", {{"responseModalities", {"TEXT", "IMAGE"}}}}};
  return body.dump();
}

GenerationResult GenerateContentAdapter::parse_response(const std::string& body) const {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("generator returned invalid JSON: ") + e.what());
  }
  GenerationResult result;
  const json* image_part = nullptr;
  if (j.contains("candidates") && !j["candidates"].empty()) {
    for (const auto& part : j["candidates"][0]["content"]["parts"]) {
      for (const char* key : {"inlineData", "inline_data"}) {
        if (part.contains(key)) image_part = &part[key];
      }
    }
  }
  if (image_part == nullptr || !image_part->contains("data")) {
    throw BackendError("generator response contains no image part");
  }
  result.image_png = base64_decode((*image_part)["data"].get<std::string>());

  if (j.contains("usageMetadata")) {
    const auto& u = j["usageMetadata"];
    result.usage.input_tokens = u.value("promptTokenCount", std::int64_t{0});
    std::int64_t image_tokens = 0;
    std::int64_t text_tokens = 0;
    bool has_details = false;
    if (u.contains("candidatesTokensDetails")) {
      for (const auto& d : u["candidatesTokensDetails"]) {
        has_details = true;
        const auto modality = d.value("modality", std::string());
        const auto count = d.value("tokenCount", std::int64_t{0});
        if (modality == "IMAGE") {
          image_tokens += count;
        } else {
          text_tokens += count;
        }
      }
    }
    if (!has_details) text_tokens = u.value("candidatesTokenCount", std::int64_t{0});
    result.usage.output_text_tokens = text_tokens;
    result.usage.output_image_tokens = image_tokens;
  }
  return result;
}

HttpGeneratorBackend::HttpGeneratorBackend(HttpGeneratorConfig config,
                                           std::unique_ptr<RequestAdapter> adapter)
    : config_(std::move(config)), adapter_(std::move(adapter)) {
  if (config_.endpoint.empty()) throw ConfigError("http generator: endpoint is required");
  if (config_.model.empty()) throw ConfigError("http generator: model is required");
  if (!adapter_) adapter_ = std::make_unique<GenerateContentAdapter>();
}

GenerationResult HttpGeneratorBackend::generate(const GenerationRequest& request) {
  std::vector<std::vector<std::uint8_t>> reference_bytes;
  for (const auto& ref : request.references) {
    std::ifstream in(ref.path, std::ios::binary);
    if (!in) throw BackendError("cannot read reference image " + ref.path.string());
    reference_bytes.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const char* key = std::getenv(config_.api_key_env.c_str());
  const std::string api_key = key != nullptr ? key : "";

  httplib::Client client(config_.endpoint);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  for (auto& [k, v] : adapter_->headers(api_key)) headers.emplace(k, v);

  const auto res = client.Post(adapter_->path(config_), headers,
                               adapter_->build_body(request, reference_bytes), "application/json");
  if (!res) {
    throw BackendError("generator request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendError("generator returned HTTP " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));
  }
  return adapter_->parse_response(res->body);
}

}  // namespace synthaug::generation
