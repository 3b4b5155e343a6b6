#include "synthaug/toy/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/common/image.hpp"
#include "synthaug/common/random.hpp"
#include "synthaug/common/types.hpp"

namespace synthaug::toy {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Defect {
  DefectClass cls = DefectClass::kShell;
  int disc = 0;
  double angle = 0.0;  // rim position, radians
  double size = 0.35;  // relative to the disc's long radius
};

struct GroupSpec {
  int n_discs = 5;
  double radius = 16.0;
  double aspect = 0.38;
  double spacing = 1.35;
  cv::Scalar color;
  cv::Scalar sky_top;
  cv::Scalar sky_bottom;
  bool vertical = false;
  std::vector<Defect> defects;
  int n_dirt = 0;
  int n_glints = 0;
};

struct DiscGeom {
  cv::Point2d center;
  double a = 0.0;  // long radius
  double b = 0.0;  // short radius
  double angle_deg = 0.0;
};

cv::Scalar jitter(const cv::Scalar& c, double amount, Rng& rng) {
  return cv::Scalar(std::clamp(c[0] + uniform(rng, -amount, amount), 0.0, 255.0),
                    std::clamp(c[1] + uniform(rng, -amount, amount), 0.0, 255.0),
                    std::clamp(c[2] + uniform(rng, -amount, amount), 0.0, 255.0));
}

GroupSpec make_group(Rng& rng, const std::vector<DefectClass>& classes) {
  static const cv::Scalar kPalette[] = {
      {45, 70, 125},    // brown glaze
      {175, 190, 180},  // pale celadon
      {150, 140, 128},  // grey-blue
      {70, 105, 150},   // tan
  };
  GroupSpec g;
  g.n_discs = 4 + static_cast<int>(uniform_index(rng, 4));
  g.radius = uniform(rng, 13.0, 19.0);
  g.aspect = uniform(rng, 0.30, 0.45);
  g.spacing = uniform(rng, 1.2, 1.6);
  g.color = jitter(kPalette[uniform_index(rng, 4)], 18.0, rng);
  g.sky_top = jitter(cv::Scalar(230, 190, 150), 20.0, rng);
  g.sky_bottom = jitter(cv::Scalar(215, 185, 150), 20.0, rng);
  g.vertical = bernoulli(rng, 0.3);
  for (auto cls : classes) {
    const int count = 1 + static_cast<int>(uniform_index(rng, 3));
    for (int k = 0; k < count; ++k) {
      Defect d;
      d.cls = cls;
      d.disc = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(g.n_discs)));
      d.angle = uniform(rng, 0.0, 2.0 * kPi);
      d.size = uniform(rng, 0.35, 0.65);
      g.defects.push_back(d);
    }
  }
  g.n_dirt = static_cast<int>(uniform_index(rng, 3));
  g.n_glints = static_cast<int>(uniform_index(rng, 3));
  return g;
}

cv::Mat sky(const GroupSpec& g, int w, int h) {
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    const double t = static_cast<double>(y) / std::max(1, h - 1);
    const cv::Vec3b c(static_cast<uchar>(g.sky_top[0] * (1 - t) + g.sky_bottom[0] * t),
                      static_cast<uchar>(g.sky_top[1] * (1 - t) + g.sky_bottom[1] * t),
                      static_cast<uchar>(g.sky_top[2] * (1 - t) + g.sky_bottom[2] * t));
    for (int x = 0; x < w; ++x) img.at<cv::Vec3b>(y, x) = c;
  }
  return img;
}

std::vector<DiscGeom> layout(const GroupSpec& g, cv::Point2d center, double scale, double rot_deg) {
  std::vector<DiscGeom> discs;
  const double a = g.radius * scale;
  const double b = a * g.aspect;
  const double step = 2.0 * b * g.spacing;
  // String axis direction; each disc's long axis is perpendicular to it.
  const double axis = (g.vertical ? 90.0 : 0.0) + rot_deg;
  const double ux = std::cos(axis * kPi / 180.0);
  const double uy = std::sin(axis * kPi / 180.0);
  for (int i = 0; i < g.n_discs; ++i) {
    const double off = (i - (g.n_discs - 1) / 2.0) * step;
    discs.push_back(DiscGeom{{center.x + ux * off, center.y + uy * off}, a, b, axis + 90.0});
  }
  return discs;
}

std::vector<cv::Point> disc_poly(const DiscGeom& d) {
  std::vector<cv::Point> pts;
  cv::ellipse2Poly(cv::Point(static_cast<int>(std::lround(d.center.x)), static_cast<int>(std::lround(d.center.y))),
                   cv::Size(static_cast<int>(std::lround(d.a)), static_cast<int>(std::lround(d.b))),
                   static_cast<int>(std::lround(d.angle_deg)), 0, 360, 5, pts);
  return pts;
}

cv::Point2d rim_point(const DiscGeom& d, double t, double inset) {
  const double ca = std::cos(d.angle_deg * kPi / 180.0);
  const double sa = std::sin(d.angle_deg * kPi / 180.0);
  const double px = (d.a - inset) * std::cos(t);
  const double py = (d.b - inset * d.b / d.a) * std::sin(t);
  return {d.center.x + px * ca - py * sa, d.center.y + px * sa + py * ca};
}

cv::Mat fill_mask(const cv::Size& size, const std::vector<cv::Point>& poly) {
  cv::Mat m = cv::Mat::zeros(size, CV_8U);
  cv::fillConvexPoly(m, poly, cv::Scalar(255), cv::LINE_AA);
  cv::threshold(m, m, 127, 255, cv::THRESH_BINARY);
  return m;
}

cv::Mat ring(const cv::Mat& mask, int width) {
  cv::Mat dil;
  cv::dilate(mask, dil, cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(2 * width + 1, 2 * width + 1)));
  return dil & ~mask;
}

void draw_string(cv::Mat& img, const cv::Mat& background, const GroupSpec& g, const std::vector<DiscGeom>& discs,
                 double defect_scale, bool with_defects, Rng& rng) {
  const cv::Scalar rod(95, 95, 98);
  cv::line(img, cv::Point(discs.front().center), cv::Point(discs.back().center), rod, 2, cv::LINE_AA);
  std::vector<cv::Mat> masks;
  for (const auto& d : discs) {
    const auto poly = disc_poly(d);
    cv::fillConvexPoly(img, poly, g.color * 0.72, cv::LINE_AA);
    // Lit upper face.
    DiscGeom top = d;
    top.a *= 0.88;
    top.b *= 0.62;
    top.center.y -= d.b * 0.22;
    cv::fillConvexPoly(img, disc_poly(top), g.color, cv::LINE_AA);
    masks.push_back(fill_mask(img.size(), poly));
  }

  auto random_spot = [&](const DiscGeom& d, double rel) {
    const cv::Point2d p = rim_point(d, uniform(rng, 0, 2 * kPi), uniform(rng, 0.2, 0.6) * d.a);
    const double r = std::max(1.2, rel * d.a);
    std::vector<cv::Point> pts;
    cv::ellipse2Poly(cv::Point(p), cv::Size(static_cast<int>(std::ceil(r)), static_cast<int>(std::ceil(r * 0.6))),
                     static_cast<int>(uniform(rng, 0, 180)), 0, 360, 20, pts);
    return pts;
  };
  for (int i = 0; i < g.n_dirt; ++i) {
    const auto& d = discs[uniform_index(rng, discs.size())];
    cv::fillConvexPoly(img, random_spot(d, uniform(rng, 0.05, 0.1)), g.color * 0.6, cv::LINE_AA);
  }
  for (int i = 0; i < g.n_glints; ++i) {
    const auto& d = discs[uniform_index(rng, discs.size())];
    cv::fillConvexPoly(img, random_spot(d, uniform(rng, 0.04, 0.07)), cv::Scalar(245, 245, 245), cv::LINE_AA);
  }
  if (!with_defects) return;

  for (const auto& def : g.defects) {
    const DiscGeom& d = discs[static_cast<std::size_t>(def.disc)];
    const cv::Mat& disc_mask = masks[static_cast<std::size_t>(def.disc)];
    const double rad = std::max(2.0, def.size * d.a * defect_scale);
    const double t = def.angle + uniform(rng, -0.25, 0.25);
    if (def.cls == DefectClass::kShell) {
      const cv::Point2d c = rim_point(d, t, -rad * 0.15);
      cv::Mat bite = cv::Mat::zeros(img.size(), CV_8U);
      cv::circle(bite, cv::Point(c), static_cast<int>(std::lround(rad)), cv::Scalar(255), cv::FILLED);
      const cv::Mat missing = bite & disc_mask;
      background.copyTo(img, missing);
      // Exposed ceramic body along the fracture.
      const cv::Mat edge = ring(missing, 2) & disc_mask;
      img.setTo(cv::Scalar(244, 246, 248), edge);
    } else {
      const cv::Point2d c = rim_point(d, t, rad * 0.55);
      cv::Mat patch = cv::Mat::zeros(img.size(), CV_8U);
      const int blobs = 2 + static_cast<int>(uniform_index(rng, 2));
      for (int k = 0; k < blobs; ++k) {
        const cv::Point2d o(c.x + uniform(rng, -0.4, 0.4) * rad, c.y + uniform(rng, -0.25, 0.25) * rad);
        cv::ellipse(patch, cv::Point(o),
                    cv::Size(static_cast<int>(std::ceil(rad * uniform(rng, 0.5, 0.9))),
                             static_cast<int>(std::ceil(rad * uniform(rng, 0.3, 0.55)))),
                    uniform(rng, 0, 180), 0, 360, cv::Scalar(255), cv::FILLED);
      }
      patch &= disc_mask;
      const cv::Scalar burnt = g.color * 0.15 + cv::Scalar(12, 22, 40);
      img.setTo(burnt, patch);
      const cv::Mat edge = ring(patch, 1) & disc_mask;
      img.setTo(g.color * 0.4 + cv::Scalar(40, 70, 110), edge);
    }
  }
}

Box bbox_of(const std::vector<DiscGeom>& discs, int w, int h) {
  cv::Rect r;
  bool first = true;
  for (const auto& d : discs) {
    const cv::Rect dr = cv::boundingRect(disc_poly(d));
    r = first ? dr : (r | dr);
    first = false;
  }
  return Box{std::max(0, r.x - 2), std::max(0, r.y - 2), std::min(w, r.x + r.width + 2),
             std::min(h, r.y + r.height + 2)};
}

double extent(const GroupSpec& g, double scale) {
  return (g.n_discs - 1) * 2.0 * g.radius * scale * g.aspect * g.spacing / 2.0 + g.radius * scale;
}

}  // namespace

json to_json(const ToyCorpusSummary& s) {
  return {{"n_groups", s.n_groups},
          {"n_images", s.n_images},
          {"n_annotations", s.n_annotations},
          {"n_dual_defect", s.n_dual_defect}};
}

ToyCorpusSummary write_toy_corpus(const std::filesystem::path& out_dir, const ToyCorpusConfig& cfg) {
  if (cfg.n_groups < 1 || cfg.min_views < 1 || cfg.max_views < cfg.min_views) {
    throw ConfigError("invalid toy corpus configuration");
  }
  if (cfg.n_dual_defect < 0 || cfg.n_dual_defect > cfg.n_groups) throw ConfigError("invalid dual-defect count");
  const auto images_dir = out_dir / "images";
  std::filesystem::create_directories(images_dir);
  Rng rng(mix_seed(cfg.seed, "toy_corpus"));
  ToyCorpusSummary summary;
  std::vector<json> rows;

  // Balanced single-class assignment, dual-defect groups spread through.
  std::vector<int> kinds(static_cast<std::size_t>(cfg.n_groups));
  for (int i = 0; i < cfg.n_groups; ++i) kinds[static_cast<std::size_t>(i)] = i % 2;
  for (int i = 0; i < cfg.n_dual_defect; ++i) kinds[static_cast<std::size_t>(i)] = 2;
  shuffle(std::span<int>(kinds), rng);

  const int w = cfg.image_width;
  const int h = cfg.image_height;
  for (int gi = 0; gi < cfg.n_groups; ++gi) {
    char gid[32];
    std::snprintf(gid, sizeof(gid), "G%03d", gi);
    const int kind = kinds[static_cast<std::size_t>(gi)];
    std::vector<DefectClass> classes;
    if (kind == 0 || kind == 2) classes.push_back(DefectClass::kShell);
    if (kind == 1 || kind == 2) classes.push_back(DefectClass::kGlaze);
    Rng grng(mix_seed(cfg.seed, std::string("group/") + gid));
    const GroupSpec g = make_group(grng, classes);
    if (kind == 2) ++summary.n_dual_defect;

    const int views =
        cfg.min_views + static_cast<int>(uniform_index(grng, static_cast<std::uint64_t>(cfg.max_views - cfg.min_views + 1)));
    for (int v = 0; v < views; ++v) {
      char iid[48];
      std::snprintf(iid, sizeof(iid), "g%03d_v%d", gi, v);
      Rng vr(mix_seed(cfg.seed, std::string("view/") + iid));
      const double scale = uniform(vr, 0.85, 1.15);
      const double rot = uniform(vr, -12.0, 12.0);
      const double ext = extent(g, scale);
      const double ext_x = g.vertical ? g.radius * scale : ext;
      const double ext_y = g.vertical ? ext : g.radius * scale;
      const double cx = uniform(vr, std::min(ext_x + 2, w / 2.0), std::max(w - ext_x - 2, w / 2.0));
      const double cy = uniform(vr, std::min(ext_y + 2, h / 2.0), std::max(h - ext_y - 2, h / 2.0));

      const cv::Mat bg = sky(g, w, h);
      cv::Mat img = bg.clone();
      std::vector<Box> boxes;
      if (bernoulli(vr, cfg.second_string_prob)) {
        GroupSpec other = g;
        other.defects.clear();
        other.n_dirt = 0;
        const double s2 = scale * 0.7;
        const double ox = cx < w / 2.0 ? uniform(vr, w * 0.7, w * 0.85) : uniform(vr, w * 0.15, w * 0.3);
        const double oy = uniform(vr, h * 0.25, h * 0.75);
        const auto discs2 = layout(other, {ox, oy}, s2, rot + uniform(vr, -5, 5));
        draw_string(img, bg, other, discs2, 1.0, false, vr);
        const Box b2 = bbox_of(discs2, w, h);
        if (b2.valid() && b2.width() > 4 && b2.height() > 4) boxes.push_back(b2);
      }
      const auto discs = layout(g, {cx, cy}, scale, rot);
      draw_string(img, bg, g, discs, uniform(vr, 0.75, 1.2), true, vr);
      boxes.push_back(bbox_of(discs, w, h));

      if (bernoulli(vr, 0.5)) {
        cv::flip(img, img, 1);
        for (auto& b : boxes) b = Box{w - b.x_max, b.y_min, w - b.x_min, b.y_max};
      }
      cv::Mat f;
      img.convertTo(f, CV_32FC3, uniform(vr, 0.8, 1.15), uniform(vr, -12, 12));
      cv::Mat noise(f.size(), CV_32FC3);
      const double sigma = uniform(vr, 3.0, 9.0);
      for (int y = 0; y < noise.rows; ++y) {
        auto* row = noise.ptr<cv::Vec3f>(y);
        for (int x = 0; x < noise.cols; ++x) {
          const float n = static_cast<float>(normal01(vr) * sigma);
          row[x] = cv::Vec3f(n, n, n);
        }
      }
      f += noise;
      cv::GaussianBlur(f, f, cv::Size(3, 3), uniform(vr, 0.3, 0.9));
      f.convertTo(img, CV_8UC3);

      const std::string file = std::string(iid) + ".png";
      save_png(images_dir / file, img);
      ++summary.n_images;
      json labels = json::array();
      for (auto c : classes) labels.push_back(to_string(c));
      for (const auto& b : boxes) {
        rows.push_back({{"image_id", iid}, {"group_id", gid}, {"bbox", to_json(b)}, {"defect_labels", labels},
                        {"file", file}});
        ++summary.n_annotations;
      }
    }
    ++summary.n_groups;
  }
  write_jsonl(out_dir / "annotations.jsonl", rows);
  return summary;
}

}  // namespace synthaug::toy
