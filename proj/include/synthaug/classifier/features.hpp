#pragma once

#include "synthaug/embedding/backend.hpp"

namespace synthaug::classifier {

// Built-in frozen feature extractor used as the classifier backbone when no
// exported pretrained network is configured. Statistics are taken over
// content pixels only (black square padding is masked out):
//   - saturation-weighted hue, saturation and value histograms;
//   - local contrast against a 7x7 median, binned separately for pixels
//     brighter and darker than their neighborhood, plus the fractions of
//     bright low-saturation and dark low-value outliers;
//   - the largest per-cell outlier fraction over a 4x4 grid;
//   - gradient orientation histogram and mean magnitude;
//   - per quadrant, mean BGR and bright/dark outlier fractions.
class GridStatsBackend final : public embedding::EmbeddingBackend {
 public:
  explicit GridStatsBackend(int input_size = 96);

  static constexpr int kGlobalFeatures = 8 + 4 + 4 + 3 + 3 + 2 + 2 + 5;
  static constexpr int kQuadrantFeatures = 4 * 5;
  static constexpr int kDimension = kGlobalFeatures + kQuadrantFeatures;

  int dimension() const override { return kDimension; }
  std::string name() const override { return "grid-stats"; }
  std::string descriptor() const override;
  std::vector<std::vector<float>> embed_batch(std::span<const cv::Mat> images) const override;

 private:
  int input_size_;
};

}  // namespace synthaug::classifier
