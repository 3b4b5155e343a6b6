#include "synthaug/common/image.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/json_io.hpp"

namespace synthaug {

cv::Mat load_image(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("unreadable image: " + path.string());
  return img;
}

cv::Mat decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DataError("empty image buffer");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("undecodable image buffer");
  return img;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& image) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", image, out)) throw DataError("png encoding failed");
  return out;
}

void save_png(const std::filesystem::path& path, const cv::Mat& image) {
  const auto bytes = encode_png(image);
  write_text_file(path, std::string(bytes.begin(), bytes.end()));
}

cv::Mat crop(const cv::Mat& image, const Box& box) {
  const cv::Rect r(box.x_min, box.y_min, box.width(), box.height());
  if (!box.valid() || r.x < 0 || r.y < 0 || r.x + r.width > image.cols ||
      r.y + r.height > image.rows) {
    throw DataError("crop box outside image bounds");
  }
  return image(r).clone();
}

cv::Mat square_pad_resize(const cv::Mat& image, int size) {
  const int side = std::max(image.cols, image.rows);
  const int left = (side - image.cols) / 2;
  const int top = (side - image.rows) / 2;
  cv::Mat padded;
  cv::copyMakeBorder(image, padded, top, side - image.rows - top, left, side - image.cols - left,
                     cv::BORDER_CONSTANT, cv::Scalar::all(0));
  cv::Mat out;
  const int interp = side > size ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::resize(padded, out, cv::Size(size, size), 0, 0, interp);
  return out;
}

}  // namespace synthaug
