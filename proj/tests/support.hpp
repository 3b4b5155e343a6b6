#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include <opencv2/core.hpp>

#include "synthaug/common/random.hpp"
#include "synthaug/dataset/curation.hpp"

namespace synthaug::testing {

namespace fs = std::filesystem;

// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("synthaug-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::vector<std::string> make_group_ids(std::size_t n, const std::string& prefix = "g") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04zu", prefix.c_str(), i);
    ids.push_back(buf);
  }
  return ids;
}

// Flat-colored image with a class-dependent blob, cheap to generate.
inline cv::Mat solid_image(int w, int h, cv::Scalar color) { return cv::Mat(h, w, CV_8UC3, color); }

inline cv::Mat noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* p = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) p[x][c] = static_cast<unsigned char>(uniform_index(rng, 256));
    }
  }
  return m;
}

// Records on disk: one PNG per image under `dir`, shell images reddish and
// glaze images bluish so a classifier can separate them.
std::vector<dataset::ImageRecord> write_record_images(const fs::path& dir, std::size_t n_groups,
                                                      std::size_t images_per_group, std::uint64_t seed,
                                                      const std::string& group_prefix = "g");

}  // namespace synthaug::testing
