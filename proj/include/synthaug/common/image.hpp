#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

#include "synthaug/common/types.hpp"

namespace synthaug {

// Loads a 3-channel BGR image; throws DataError when unreadable.
cv::Mat load_image(const std::filesystem::path& path);
cv::Mat decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const cv::Mat& image);
void save_png(const std::filesystem::path& path, const cv::Mat& image);

cv::Mat crop(const cv::Mat& image, const Box& box);

// Pads the shorter side symmetrically with black to a square, then resizes
// to size x size. This is the only transform applied at evaluation time.
cv::Mat square_pad_resize(const cv::Mat& image, int size);

}  // namespace synthaug
