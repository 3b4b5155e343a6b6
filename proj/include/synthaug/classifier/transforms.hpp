#pragma once

// Per-policy image transforms for classifier training and evaluation. Every
// output is a square input_size x input_size BGR image.

#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "synthaug/common/random.hpp"
#include "synthaug/common/types.hpp"

namespace synthaug::classifier {

struct AugmentParams {
  int input_size = 224;
  // Real crops grow by a fraction m ~ U[0, crop_expansion_max] of their size,
  // split randomly between the two sides of each axis.
  double crop_expansion_max = 0.3;
  // Synthetic images are zoomed out by s ~ U[1, zoom_out_max].
  double zoom_out_max = 1.3;
  double hflip_prob = 0.5;
  bool flip_synthetic = true;
  bool randaugment = false;
  int randaugment_ops = 2;
  int randaugment_magnitude = 9;
};

// Crop `box` out of `source` after random expansion, then flip.
cv::Mat transform_real_train(const cv::Mat& source, const Box& box, const AugmentParams& p, Rng& rng);

// Random zoom-out (reflected border), then flip.
cv::Mat transform_synthetic_train(const cv::Mat& image, const AugmentParams& p, Rng& rng);

// Deterministic square pad + resize only.
cv::Mat transform_eval(const cv::Mat& image, int input_size);

// Region of `source` a real-train transform can ever read for `box`: the box
// grown by crop_expansion_max of its size on every side, clipped.
Box expansion_envelope(const Box& box, int image_width, int image_height, double crop_expansion_max);

enum class RandAugmentOp {
  kIdentity,
  kShearX,
  kShearY,
  kTranslateX,
  kTranslateY,
  kRotate,
  kBrightness,
  kColor,
  kContrast,
  kSharpness,
  kPosterize,
  kSolarize,
  kAutoContrast,
  kEqualize,
};
inline constexpr int kNumRandAugmentOps = 14;
std::string_view to_string(RandAugmentOp op);

// Applies one op at magnitude m on the 0..30 scale; `negate` flips the sign
// of signed ops.
cv::Mat apply_randaugment_op(const cv::Mat& image, RandAugmentOp op, int magnitude, bool negate);

// N ops drawn uniformly with replacement, each at magnitude M with a random
// sign.
cv::Mat randaugment(const cv::Mat& image, int n_ops, int magnitude, Rng& rng);

}  // namespace synthaug::classifier
