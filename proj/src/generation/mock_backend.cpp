#include <cmath>

#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/common/random.hpp"
#include "synthaug/generation/backend.hpp"

namespace synthaug::generation {

GenerationResult MockGeneratorBackend::generate(const GenerationRequest& request) {
  if (request.references.empty() || request.references.size() > 2) {
    throw BackendError("mock backend takes 1 or 2 references, got " +
                       std::to_string(request.references.size()));
  }
  Rng rng(mix_seed(request.seed, "mock_generator"));

  std::vector<cv::Mat> refs;
  for (const auto& r : request.references) {
    cv::Mat img;
    try {
      img = load_image(r.path);
    } catch (const DataError& e) {
      throw BackendError(std::string("mock backend: ") + e.what());
    }
    cv::Mat f;
    square_pad_resize(img, image_size_).convertTo(f, CV_32FC3);
    refs.push_back(f);
  }

  cv::Mat canvas = refs[0];
  if (refs.size() == 2 && composite_ == MockComposite::kAlphaBlend) {
    const double alpha = uniform(rng, 0.35, 0.65);
    cv::addWeighted(refs[0], alpha, refs[1], 1.0 - alpha, 0.0, canvas);
  } else if (refs.size() == 2) {
    // Composite along a feathered random line through the middle, so each
    // side keeps its local detail at full contrast.
    const double theta = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
    const double nx = std::cos(theta), ny = std::sin(theta);
    const double off = uniform(rng, -0.15, 0.15) * image_size_;
    const double feather = std::max(1.0, image_size_ / 32.0);
    cv::Mat mask(canvas.size(), CV_32FC3);
    const double c = image_size_ / 2.0;
    for (int y = 0; y < mask.rows; ++y) {
      auto* row = mask.ptr<cv::Vec3f>(y);
      for (int x = 0; x < mask.cols; ++x) {
        const double d = ((x - c) * nx + (y - c) * ny - off) / feather;
        const float w = static_cast<float>(1.0 / (1.0 + std::exp(-d)));
        row[x] = cv::Vec3f(w, w, w);
      }
    }
    canvas = refs[0].mul(mask) + refs[1].mul(cv::Scalar::all(1.0) - mask);
  }

  const double s = static_cast<double>(image_size_);
  const double angle = uniform(rng, -12.0, 12.0);
  const double scale = uniform(rng, 0.9, 1.1);
  cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(static_cast<float>(s / 2), static_cast<float>(s / 2)),
                                      angle, scale);
  m.at<double>(0, 2) += uniform(rng, -0.06, 0.06) * s;
  m.at<double>(1, 2) += uniform(rng, -0.06, 0.06) * s;
  cv::Mat warped;
  cv::warpAffine(canvas, warped, m, canvas.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT);
  if (bernoulli(rng, 0.5)) cv::flip(warped, warped, 1);

  const double gain = uniform(rng, 0.9, 1.1);
  const cv::Scalar shift(uniform(rng, -18, 18), uniform(rng, -18, 18), uniform(rng, -18, 18));
  cv::Mat shifted = warped * gain + shift;
  cv::Mat out;
  shifted.convertTo(out, CV_8UC3);

  GenerationResult result;
  result.image_png = encode_png(out);
  // Token counts shaped like a multimodal image endpoint: ~258 tokens per
  // input image, ~1120 per generated image.
  result.usage.input_tokens =
      258 * static_cast<std::int64_t>(refs.size()) + static_cast<std::int64_t>(request.prompt_text.size() / 4);
  result.usage.output_text_tokens = 8 + static_cast<std::int64_t>(uniform_index(rng, 24));
  result.usage.output_image_tokens = 1120;
  return result;
}

std::string_view to_string(MockComposite m) {
  return m == MockComposite::kAlphaBlend ? "alpha" : "seam";
}

MockComposite parse_mock_composite(std::string_view s) {
  if (s == "alpha") return MockComposite::kAlphaBlend;
  if (s == "seam") return MockComposite::kSeam;
  throw ConfigError("unknown mock composite '" + std::string(s) + "' (expected alpha or seam)");
}

}  // namespace synthaug::generation
