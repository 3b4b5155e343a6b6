#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace synthaug::embedding {

struct EmbeddingVector {
  std::string image_id;
  std::vector<float> values;
};

// Maps images to fixed-dimension vectors. Implementations are deterministic
// (same image bytes, same vector) and safe to call concurrently.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual int dimension() const = 0;
  // Short name used as the cache directory.
  virtual std::string name() const = 0;
  // Model and preprocessing description, recorded in manifests.
  virtual std::string descriptor() const = 0;
  virtual std::vector<std::vector<float>> embed_batch(std::span<const cv::Mat> images) const = 0;
};

// Offline stand-in: a seeded Gaussian random projection of the 16x16
// square-padded thumbnail. Close images stay close, which keeps centroid
// ranking meaningful in tests.
class HashProjectionBackend final : public EmbeddingBackend {
 public:
  explicit HashProjectionBackend(int dimension = 512, std::uint64_t seed = 0);

  int dimension() const override { return dimension_; }
  std::string name() const override { return "hash-projection"; }
  std::string descriptor() const override;
  std::vector<std::vector<float>> embed_batch(std::span<const cv::Mat> images) const override;

  static constexpr int kThumbnail = 16;

 private:
  int dimension_;
  std::uint64_t seed_;
  // dimension_ x (kThumbnail * kThumbnail * 3), row-major.
  std::vector<float> projection_;
};

// Penultimate-layer features from an exported image backbone (ONNX), e.g. a
// residual network with its classification head removed. Preprocessing:
// square pad, resize to `input_size`, RGB, ImageNet mean/std.
class OnnxEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit OnnxEmbeddingBackend(std::filesystem::path model_path, int input_size = 224);
  ~OnnxEmbeddingBackend() override;

  int dimension() const override { return dimension_; }
  std::string name() const override;
  std::string descriptor() const override;
  std::vector<std::vector<float>> embed_batch(std::span<const cv::Mat> images) const override;

 private:
  struct Net;
  std::filesystem::path model_path_;
  int input_size_;
  int dimension_ = 0;
  std::unique_ptr<Net> net_;
};

struct ImageRef {
  std::string image_id;
  std::filesystem::path path;
};

struct EmbedResult {
  std::string image_id;
  std::optional<EmbeddingVector> vector;
  // Set when the image could not be read or embedded.
  std::string error;
};

// One result per input, in input order. Unreadable images yield an error
// entry and do not stop the rest.
std::vector<EmbedResult> embed_images(const EmbeddingBackend& backend, std::span<const ImageRef> images,
                                      int batch_size = 32);

// `<dir>/<image_id>.vec`: little-endian uint32 length, then that many
// little-endian float32 values.
void write_vec(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_vec(const std::filesystem::path& path);

// Embeds through a per-backend file cache under `cache_root/<backend name>/`.
std::vector<EmbedResult> embed_images_cached(const EmbeddingBackend& backend,
                                             std::span<const ImageRef> images,
                                             const std::filesystem::path& cache_root,
                                             int batch_size = 32);

}  // namespace synthaug::embedding
