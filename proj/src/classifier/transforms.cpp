#include "synthaug/classifier/transforms.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"

namespace synthaug::classifier {

namespace {

constexpr double kMaxMagnitude = 30.0;

cv::Mat maybe_flip(cv::Mat img, double prob, Rng& rng) {
  if (bernoulli(rng, prob)) {
    cv::Mat out;
    cv::flip(img, out, 1);
    return out;
  }
  return img;
}

cv::Mat blend(const cv::Mat& degenerate, const cv::Mat& img, double factor) {
  cv::Mat out;
  cv::addWeighted(img, factor, degenerate, 1.0 - factor, 0.0, out);
  return out;
}

cv::Mat warp(const cv::Mat& img, const cv::Mat& m) {
  cv::Mat out;
  cv::warpAffine(img, out, m, img.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar::all(0));
  return out;
}

cv::Mat gray3(const cv::Mat& img) {
  cv::Mat g, out;
  cv::cvtColor(img, g, cv::COLOR_BGR2GRAY);
  cv::cvtColor(g, out, cv::COLOR_GRAY2BGR);
  return out;
}

}  // namespace

Box expansion_envelope(const Box& box, int image_width, int image_height, double crop_expansion_max) {
  const double mw = box.width() * crop_expansion_max;
  const double mh = box.height() * crop_expansion_max;
  return Box{std::max(0, static_cast<int>(std::floor(box.x_min - mw))),
             std::max(0, static_cast<int>(std::floor(box.y_min - mh))),
             std::min(image_width, static_cast<int>(std::ceil(box.x_max + mw))),
             std::min(image_height, static_cast<int>(std::ceil(box.y_max + mh)))};
}

cv::Mat transform_real_train(const cv::Mat& source, const Box& box, const AugmentParams& p, Rng& rng) {
  const double m = uniform(rng, 0.0, p.crop_expansion_max);
  const double split_x = uniform01(rng);
  const double split_y = uniform01(rng);
  const double grow_w = m * box.width();
  const double grow_h = m * box.height();
  const Box b{std::max(0, static_cast<int>(std::lround(box.x_min - grow_w * split_x))),
              std::max(0, static_cast<int>(std::lround(box.y_min - grow_h * split_y))),
              std::min(source.cols, static_cast<int>(std::lround(box.x_max + grow_w * (1.0 - split_x)))),
              std::min(source.rows, static_cast<int>(std::lround(box.y_max + grow_h * (1.0 - split_y))))};
  cv::Mat out = square_pad_resize(crop(source, b), p.input_size);
  out = maybe_flip(out, p.hflip_prob, rng);
  if (p.randaugment) out = randaugment(out, p.randaugment_ops, p.randaugment_magnitude, rng);
  return out;
}

cv::Mat transform_synthetic_train(const cv::Mat& image, const AugmentParams& p, Rng& rng) {
  const double s = uniform(rng, 1.0, p.zoom_out_max);
  const cv::Mat sq = square_pad_resize(image, p.input_size);
  const int inner = std::max(1, static_cast<int>(std::lround(p.input_size / s)));
  cv::Mat small;
  cv::resize(sq, small, cv::Size(inner, inner), 0, 0, cv::INTER_AREA);
  const int slack = p.input_size - inner;
  const int left = slack > 0 ? static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(slack) + 1)) : 0;
  const int top = slack > 0 ? static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(slack) + 1)) : 0;
  cv::Mat out;
  cv::copyMakeBorder(small, out, top, slack - top, left, slack - left, cv::BORDER_REFLECT_101);
  if (p.flip_synthetic) out = maybe_flip(out, p.hflip_prob, rng);
  if (p.randaugment) out = randaugment(out, p.randaugment_ops, p.randaugment_magnitude, rng);
  return out;
}

cv::Mat transform_eval(const cv::Mat& image, int input_size) { return square_pad_resize(image, input_size); }

std::string_view to_string(RandAugmentOp op) {
  switch (op) {
    case RandAugmentOp::kIdentity: return "identity";
    case RandAugmentOp::kShearX: return "shear_x";
    case RandAugmentOp::kShearY: return "shear_y";
    case RandAugmentOp::kTranslateX: return "translate_x";
    case RandAugmentOp::kTranslateY: return "translate_y";
    case RandAugmentOp::kRotate: return "rotate";
    case RandAugmentOp::kBrightness: return "brightness";
    case RandAugmentOp::kColor: return "color";
    case RandAugmentOp::kContrast: return "contrast";
    case RandAugmentOp::kSharpness: return "sharpness";
    case RandAugmentOp::kPosterize: return "posterize";
    case RandAugmentOp::kSolarize: return "solarize";
    case RandAugmentOp::kAutoContrast: return "auto_contrast";
    case RandAugmentOp::kEqualize: return "equalize";
  }
  return "unknown";
}

// Magnitude ranges follow the common 31-bin RandAugment parameterization.
cv::Mat apply_randaugment_op(const cv::Mat& img, RandAugmentOp op, int magnitude, bool negate) {
  if (magnitude < 0 || magnitude > static_cast<int>(kMaxMagnitude)) {
    throw ConfigError("RandAugment magnitude must be in [0, 30]");
  }
  const double level = magnitude / kMaxMagnitude;
  const double sign = negate ? -1.0 : 1.0;
  const double cx = img.cols * 0.5;
  const double cy = img.rows * 0.5;
  switch (op) {
    case RandAugmentOp::kIdentity:
      return img.clone();
    case RandAugmentOp::kShearX: {
      const double s = sign * 0.3 * level;
      cv::Mat m = (cv::Mat_<double>(2, 3) << 1, s, -s * cy, 0, 1, 0);
      return warp(img, m);
    }
    case RandAugmentOp::kShearY: {
      const double s = sign * 0.3 * level;
      cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, 0, s, 1, -s * cx);
      return warp(img, m);
    }
    case RandAugmentOp::kTranslateX: {
      const double t = sign * (150.0 / 331.0) * level * img.cols;
      cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, t, 0, 1, 0);
      return warp(img, m);
    }
    case RandAugmentOp::kTranslateY: {
      const double t = sign * (150.0 / 331.0) * level * img.rows;
      cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, 0, 0, 1, t);
      return warp(img, m);
    }
    case RandAugmentOp::kRotate:
      return warp(img, cv::getRotationMatrix2D(cv::Point2f(static_cast<float>(cx), static_cast<float>(cy)),
                                               sign * 30.0 * level, 1.0));
    case RandAugmentOp::kBrightness:
      return blend(cv::Mat::zeros(img.size(), img.type()), img, 1.0 + sign * 0.9 * level);
    case RandAugmentOp::kColor:
      return blend(gray3(img), img, 1.0 + sign * 0.9 * level);
    case RandAugmentOp::kContrast: {
      cv::Mat g;
      cv::cvtColor(img, g, cv::COLOR_BGR2GRAY);
      const double mean = cv::mean(g)[0];
      return blend(cv::Mat(img.size(), img.type(), cv::Scalar::all(mean)), img, 1.0 + sign * 0.9 * level);
    }
    case RandAugmentOp::kSharpness: {
      cv::Mat k = (cv::Mat_<float>(3, 3) << 1, 1, 1, 1, 5, 1, 1, 1, 1) / 13.0f;
      cv::Mat smooth;
      cv::filter2D(img, smooth, -1, k, cv::Point(-1, -1), 0, cv::BORDER_REPLICATE);
      return blend(smooth, img, 1.0 + sign * 0.9 * level);
    }
    case RandAugmentOp::kPosterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0 * level));
      const auto mask = static_cast<uchar>(0xFF << (8 - bits));
      cv::Mat out;
      cv::bitwise_and(img, cv::Scalar::all(mask), out);
      return out;
    }
    case RandAugmentOp::kSolarize: {
      const double thr = 255.0 * (1.0 - level);
      cv::Mat out = img.clone();
      out.forEach<cv::Vec3b>([thr](cv::Vec3b& px, const int*) {
        for (int c = 0; c < 3; ++c) {
          if (px[c] >= thr) px[c] = static_cast<uchar>(255 - px[c]);
        }
      });
      return out;
    }
    case RandAugmentOp::kAutoContrast: {
      std::vector<cv::Mat> ch;
      cv::split(img, ch);
      for (auto& c : ch) {
        double lo = 0, hi = 0;
        cv::minMaxLoc(c, &lo, &hi);
        if (hi > lo) c.convertTo(c, CV_8U, 255.0 / (hi - lo), -lo * 255.0 / (hi - lo));
      }
      cv::Mat out;
      cv::merge(ch, out);
      return out;
    }
    case RandAugmentOp::kEqualize: {
      std::vector<cv::Mat> ch;
      cv::split(img, ch);
      for (auto& c : ch) cv::equalizeHist(c, c);
      cv::Mat out;
      cv::merge(ch, out);
      return out;
    }
  }
  return img.clone();
}

cv::Mat randaugment(const cv::Mat& image, int n_ops, int magnitude, Rng& rng) {
  cv::Mat out = image;
  for (int i = 0; i < n_ops; ++i) {
    const auto op = static_cast<RandAugmentOp>(uniform_index(rng, kNumRandAugmentOps));
    const bool negate = bernoulli(rng, 0.5);
    out = apply_randaugment_op(out, op, magnitude, negate);
  }
  return out;
}

}  // namespace synthaug::classifier
