#include "synthaug/embedding/backend.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/common/random.hpp"

namespace synthaug::embedding {

static_assert(std::endian::native == std::endian::little, "vec cache assumes a little-endian host");

HashProjectionBackend::HashProjectionBackend(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension < 1) throw ConfigError("embedding dimension must be >= 1");
  constexpr int in = kThumbnail * kThumbnail * 3;
  projection_.resize(static_cast<std::size_t>(dimension) * in);
  Rng rng(mix_seed(seed, "hash_projection"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : projection_) w = static_cast<float>(normal01(rng) * scale);
}

std::string HashProjectionBackend::descriptor() const {
  return "hash-projection(d=" + std::to_string(dimension_) + ", seed=" + std::to_string(seed_) +
         ", thumbnail=16x16 square-pad, pixels/255)";
}

std::vector<std::vector<float>> HashProjectionBackend::embed_batch(std::span<const cv::Mat> images) const {
  constexpr int in = kThumbnail * kThumbnail * 3;
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  std::vector<float> x(in);
  for (const auto& img : images) {
    const cv::Mat thumb = square_pad_resize(img, kThumbnail);
    for (int r = 0, k = 0; r < kThumbnail; ++r) {
      const auto* row = thumb.ptr<cv::Vec3b>(r);
      for (int c = 0; c < kThumbnail; ++c) {
        for (int ch = 0; ch < 3; ++ch) x[k++] = static_cast<float>(row[c][ch]) / 255.0f;
      }
    }
    std::vector<float> v(static_cast<std::size_t>(dimension_));
    for (int d = 0; d < dimension_; ++d) {
      const float* w = projection_.data() + static_cast<std::size_t>(d) * in;
      double acc = 0.0;
      for (int k = 0; k < in; ++k) acc += static_cast<double>(w[k]) * x[k];
      v[d] = static_cast<float>(acc);
    }
    out.push_back(std::move(v));
  }
  return out;
}

struct OnnxEmbeddingBackend::Net {
  cv::dnn::Net net;
  std::mutex mu;
};

OnnxEmbeddingBackend::OnnxEmbeddingBackend(std::filesystem::path model_path, int input_size)
    : model_path_(std::move(model_path)), input_size_(input_size), net_(std::make_unique<Net>()) {
  if (!std::filesystem::exists(model_path_)) {
    throw ConfigError("embedding model not found: " + model_path_.string());
  }
  try {
    net_->net = cv::dnn::readNetFromONNX(model_path_.string());
  } catch (const cv::Exception& e) {
    throw BackendError("cannot load ONNX model " + model_path_.string() + ": " + e.what());
  }
  const cv::Mat probe(input_size_, input_size_, CV_8UC3, cv::Scalar::all(127));
  dimension_ = static_cast<int>(embed_batch(std::span<const cv::Mat>(&probe, 1)).front().size());
}

OnnxEmbeddingBackend::~OnnxEmbeddingBackend() = default;

std::string OnnxEmbeddingBackend::name() const { return "onnx-" + model_path_.stem().string(); }

std::string OnnxEmbeddingBackend::descriptor() const {
  return "onnx(" + model_path_.filename().string() + ", input=" + std::to_string(input_size_) +
         " square-pad, RGB, imagenet mean/std, d=" + std::to_string(dimension_) + ")";
}

std::vector<std::vector<float>> OnnxEmbeddingBackend::embed_batch(std::span<const cv::Mat> images) const {
  if (images.empty()) return {};
  std::vector<cv::Mat> prepared;
  prepared.reserve(images.size());
  const cv::Scalar mean(0.485, 0.456, 0.406);
  const cv::Scalar stdev(0.229, 0.224, 0.225);
  for (const auto& img : images) {
    cv::Mat rgb;
    cv::cvtColor(square_pad_resize(img, input_size_), rgb, cv::COLOR_BGR2RGB);
    cv::Mat f;
    rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
    f = (f - mean);
    cv::divide(f, stdev, f);
    prepared.push_back(f);
  }
  const cv::Mat blob = cv::dnn::blobFromImages(prepared);
  cv::Mat result;
  {
    std::lock_guard lock(net_->mu);
    net_->net.setInput(blob);
    try {
      result = net_->net.forward().clone();
    } catch (const cv::Exception& e) {
      throw BackendError(std::string("ONNX forward failed: ") + e.what());
    }
  }
  const int n = result.size[0];
  const auto per = static_cast<std::size_t>(result.total() / static_cast<std::size_t>(n));
  std::vector<std::vector<float>> out;
  const auto* data = result.ptr<float>();
  for (int i = 0; i < n; ++i) out.emplace_back(data + i * per, data + (i + 1) * per);
  return out;
}

std::vector<EmbedResult> embed_images(const EmbeddingBackend& backend, std::span<const ImageRef> images,
                                      int batch_size) {
  std::vector<EmbedResult> out(images.size());
  std::vector<cv::Mat> pending;
  std::vector<std::size_t> pending_idx;
  auto flush = [&] {
    if (pending.empty()) return;
    std::vector<std::vector<float>> vecs;
    try {
      vecs = backend.embed_batch(pending);
    } catch (const Error& e) {
      for (auto i : pending_idx) out[i].error = e.what();
      pending.clear();
      pending_idx.clear();
      return;
    }
    for (std::size_t k = 0; k < pending_idx.size(); ++k) {
      const auto i = pending_idx[k];
      const bool finite = std::all_of(vecs[k].begin(), vecs[k].end(), [](float v) { return std::isfinite(v); });
      if (static_cast<int>(vecs[k].size()) != backend.dimension() || !finite) {
        out[i].error = "backend returned an invalid vector";
      } else {
        out[i].vector = EmbeddingVector{images[i].image_id, std::move(vecs[k])};
      }
    }
    pending.clear();
    pending_idx.clear();
  };
  for (std::size_t i = 0; i < images.size(); ++i) {
    out[i].image_id = images[i].image_id;
    try {
      pending.push_back(load_image(images[i].path));
      pending_idx.push_back(i);
    } catch (const DataError& e) {
      out[i].error = e.what();
    }
    if (static_cast<int>(pending.size()) >= batch_size) flush();
  }
  flush();
  return out;
}

void write_vec(const std::filesystem::path& path, std::span<const float> values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    const auto n = static_cast<std::uint32_t>(values.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<float> read_vec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw DataError("truncated vec header in " + path.string());
  std::vector<float> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in || in.peek() != std::char_traits<char>::eof()) {
    throw DataError("vec length mismatch in " + path.string());
  }
  return values;
}

std::vector<EmbedResult> embed_images_cached(const EmbeddingBackend& backend,
                                             std::span<const ImageRef> images,
                                             const std::filesystem::path& cache_root, int batch_size) {
  const auto dir = cache_root / backend.name();
  std::vector<EmbedResult> out(images.size());
  std::vector<ImageRef> missing;
  std::vector<std::size_t> missing_idx;
  for (std::size_t i = 0; i < images.size(); ++i) {
    out[i].image_id = images[i].image_id;
    const auto file = dir / (images[i].image_id + ".vec");
    if (std::filesystem::exists(file)) {
      auto v = read_vec(file);
      if (static_cast<int>(v.size()) == backend.dimension()) {
        out[i].vector = EmbeddingVector{images[i].image_id, std::move(v)};
        continue;
      }
    }
    missing.push_back(images[i]);
    missing_idx.push_back(i);
  }
  auto fresh = embed_images(backend, missing, batch_size);
  for (std::size_t k = 0; k < fresh.size(); ++k) {
    if (fresh[k].vector) write_vec(dir / (fresh[k].image_id + ".vec"), fresh[k].vector->values);
    out[missing_idx[k]] = std::move(fresh[k]);
  }
  return out;
}

}  // namespace synthaug::embedding
