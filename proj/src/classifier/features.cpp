#include "synthaug/classifier/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"

namespace synthaug::classifier {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMedian = 7;
constexpr double kOutlier = 0.12;

std::vector<float> grid_features(const cv::Mat& bgr8, int size) {
  const cv::Mat img8 = (bgr8.cols == size && bgr8.rows == size) ? bgr8 : square_pad_resize(bgr8, size);

  // Content mask; outliers need a fully populated median window.
  cv::Mat maxc;
  {
    std::vector<cv::Mat> ch;
    cv::split(img8, ch);
    maxc = cv::max(cv::max(ch[0], ch[1]), ch[2]);
  }
  const cv::Mat content = maxc > 4;
  cv::Mat inner;
  cv::erode(content, inner, cv::getStructuringElement(cv::MORPH_RECT, cv::Size(kMedian + 2, kMedian + 2)));

  cv::Mat gray8, median8, hsv;
  cv::cvtColor(img8, gray8, cv::COLOR_BGR2GRAY);
  cv::medianBlur(gray8, median8, kMedian);
  cv::cvtColor(img8, hsv, cv::COLOR_BGR2HSV);
  cv::Mat gray;
  gray8.convertTo(gray, CV_32F, 1.0 / 255.0);
  cv::Mat gx, gy, mag, ang;
  cv::Sobel(gray, gx, CV_32F, 1, 0, 3);
  cv::Sobel(gray, gy, CV_32F, 0, 1, 3);
  cv::cartToPolar(gx, gy, mag, ang);

  std::array<double, 8> hue{};
  std::array<double, 4> sat{}, val{}, orient{};
  std::array<double, 3> bright{}, dark{};
  double white = 0, burnt = 0, n = 0, n_inner = 0, msum = 0;
  constexpr int kCells = 4;
  std::array<double, kCells * kCells> cell_b{}, cell_d{}, cell_n{};
  std::array<cv::Vec3d, 4> quad_bgr{};
  std::array<double, 4> quad_b{}, quad_d{}, quad_n{}, quad_inner{};

  for (int y = 0; y < size; ++y) {
    const auto* px = img8.ptr<cv::Vec3b>(y);
    const auto* hv = hsv.ptr<cv::Vec3b>(y);
    const auto* cm = content.ptr<uchar>(y);
    const auto* im = inner.ptr<uchar>(y);
    const auto* g = gray8.ptr<uchar>(y);
    const auto* md = median8.ptr<uchar>(y);
    const auto* m = mag.ptr<float>(y);
    const auto* a = ang.ptr<float>(y);
    for (int x = 0; x < size; ++x) {
      if (!cm[x]) continue;
      const int q = (y * 2 / size) * 2 + (x * 2 / size);
      n += 1;
      quad_n[q] += 1;
      quad_bgr[q] += cv::Vec3d(px[x][0], px[x][1], px[x][2]) / 255.0;
      const double s = hv[x][1] / 255.0;
      const double v = hv[x][2] / 255.0;
      hue[std::min(7, hv[x][0] * 8 / 180)] += s;
      sat[std::min(3, hv[x][1] * 4 / 256)] += 1;
      val[std::min(3, hv[x][2] * 4 / 256)] += 1;
      if (!im[x]) continue;
      n_inner += 1;
      quad_inner[q] += 1;
      msum += m[x];
      const double theta = std::fmod(static_cast<double>(a[x]), kPi);
      orient[std::clamp(static_cast<int>(theta / (kPi / 4.0)), 0, 3)] += m[x];
      const double d = (static_cast<int>(g[x]) - static_cast<int>(md[x])) / 255.0;
      const int c = (y * kCells / size) * kCells + (x * kCells / size);
      cell_n[c] += 1;
      if (d >= 0.08) bright[d >= 0.28 ? 2 : d >= 0.16 ? 1 : 0] += 1;
      if (d <= -0.08) dark[d <= -0.28 ? 2 : d <= -0.16 ? 1 : 0] += 1;
      if (d >= kOutlier) {
        cell_b[c] += 1;
        quad_b[q] += 1;
        if (s < 0.2) white += 1;
      }
      if (d <= -kOutlier) {
        cell_d[c] += 1;
        quad_d[q] += 1;
        if (v < 0.35) burnt += 1;
      }
    }
  }

  const double nn = std::max(1.0, n);
  const double ni = std::max(1.0, n_inner);
  std::vector<float> f;
  f.reserve(GridStatsBackend::kDimension);
  auto push = [&](double v) { f.push_back(static_cast<float>(v)); };
  for (double h : hue) push(h / nn);
  for (double s : sat) push(s / nn);
  for (double v : val) push(v / nn);
  for (double b : bright) push(b / ni);
  for (double d : dark) push(d / ni);
  push(white / ni);
  push(burnt / ni);
  double max_b = 0, max_d = 0;
  for (std::size_t c = 0; c < cell_n.size(); ++c) {
    if (cell_n[c] < 1) continue;
    max_b = std::max(max_b, cell_b[c] / cell_n[c]);
    max_d = std::max(max_d, cell_d[c] / cell_n[c]);
  }
  push(max_b);
  push(max_d);
  for (double o : orient) push(o / ni);
  push(msum / ni);
  for (int q = 0; q < 4; ++q) {
    const double qn = std::max(1.0, quad_n[q]);
    const double qi = std::max(1.0, quad_inner[q]);
    for (int c = 0; c < 3; ++c) push(quad_bgr[q][c] / qn);
    push(quad_b[q] / qi);
    push(quad_d[q] / qi);
  }
  return f;
}

}  // namespace

GridStatsBackend::GridStatsBackend(int input_size) : input_size_(input_size) {
  if (input_size < 2 * kMedian + 4) throw ConfigError("grid-stats input size too small");
}

std::string GridStatsBackend::descriptor() const {
  return "grid-stats(input=" + std::to_string(input_size_) + " square-pad, median7 contrast, d=" +
         std::to_string(kDimension) + ")";
}

std::vector<std::vector<float>> GridStatsBackend::embed_batch(std::span<const cv::Mat> images) const {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(grid_features(img, input_size_));
  return out;
}

}  // namespace synthaug::classifier
