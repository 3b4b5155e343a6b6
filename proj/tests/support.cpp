#include "support.hpp"

#include <opencv2/imgproc.hpp>

#include "synthaug/common/image.hpp"

namespace synthaug::testing {

std::vector<dataset::ImageRecord> write_record_images(const fs::path& dir, std::size_t n_groups,
                                                      std::size_t images_per_group, std::uint64_t seed,
                                                      const std::string& group_prefix) {
  fs::create_directories(dir);
  Rng rng(seed);
  std::vector<dataset::ImageRecord> out;
  const auto groups = make_group_ids(n_groups, group_prefix);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto cls = g % 2 == 0 ? DefectClass::kShell : DefectClass::kGlaze;
    for (std::size_t i = 0; i < images_per_group; ++i) {
      const int w = 40, h = 32;
      cv::Mat img = noise_image(w, h, rng()) * 0.25;
      const cv::Scalar tint = cls == DefectClass::kShell ? cv::Scalar(40, 60, 200) : cv::Scalar(200, 120, 40);
      cv::circle(img, {w / 2 + static_cast<int>(uniform_index(rng, 7)) - 3, h / 2}, 9, tint, cv::FILLED);
      dataset::ImageRecord r;
      r.image_id = groups[g] + "_v" + std::to_string(i);
      r.group_id = groups[g];
      r.label_vector = one_hot(cls);
      r.crop_box = {4, 4, w - 4, h - 4};
      r.source_path = (dir / (r.image_id + ".png")).string();
      r.crop_path = r.source_path;
      save_png(r.source_path, img);
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace synthaug::testing
