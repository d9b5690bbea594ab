#pragma once

#include "gqstn/geometry.hpp"
#include "gqstn/stn.hpp"
#include "gqstn/tensor.hpp"

namespace gqstn {

// Physical metadata of a top-down depth image. The camera is a fixed
// orthographic approximation; table depth equals camera_height.
struct ImageMeta {
  int64_t height = 96, width = 96;
  double pixel_scale = 0.001;   // meters per pixel
  double camera_height = 0.70;  // meters above the table
  double table_depth() const { return camera_height; }
};

struct DepthImage {
  ImageMeta meta;
  std::vector<double> depth;  // row-major, meters from the camera
};

inline Tensor depth_tensor(const DepthImage& im) {
  return Tensor({im.meta.height, im.meta.width}, im.depth);
}

// 5D grasp {x, y, z, theta, w}: image-pixel center, gripper height in meters
// above the table, axis angle in (-pi/2, pi/2], jaw opening in meters.
struct GraspConfig {
  double x = 0, y = 0;  // pixels
  double z = 0;         // meters
  double theta = 0;     // radians, canonicalized
  double w = 0.05;      // meters

  static double canonical_angle(double t) {
    while (t > kPi / 2) t -= kPi;
    while (t <= -kPi / 2) t += kPi;
    return t;
  }
};

struct RectGrasp {
  double cx = 0, cy = 0;  // pixels
  double angle = 0;       // radians
  double width_px = 0;    // opening along the gripper axis
  double height_px = 0;   // == width_px / 5 (finger-tip size convention)
};

// Crop resolution consumed by the robustness classifier.
inline constexpr int64_t kCropSize = 32;
// The jaw opening spans this fraction of the crop width (w = s/3 convention).
inline constexpr double kOpeningFraction = 1.0 / 3.0;

inline RectGrasp rect_from_grasp(const GraspConfig& g, const ImageMeta& meta) {
  RectGrasp r;
  r.cx = g.x;
  r.cy = g.y;
  r.angle = g.theta;
  r.width_px = g.w / meta.pixel_scale;
  r.height_px = r.width_px / 5.0;
  return r;
}

inline Polygon rect_polygon(const RectGrasp& r) {
  return oriented_rect({r.cx, r.cy}, r.angle, r.width_px, r.height_px);
}

// ---- cascade <-> grasp conversions ----
// Images are square for all grasp work; normalized units are then isotropic.

struct CascadeParams {
  AffineParams t, r, c;
  double z_raw = 0;  // normalized gripper height (w_z convention)
  CascadeParams() : t(AffineParams::translation(0, 0)), r(AffineParams::rotation(0)),
                    c(AffineParams::scale(1)) {}
};

inline void require_square(const ImageMeta& meta, const char* who) {
  if (meta.height != meta.width)
    throw TensorError(std::string(who) + ": grasp coordinate math requires square images");
}

// Pixel opening <-> scale factor: a crop at scale s spans s*(W-1) pixels and
// the opening covers a third of it.
inline double scale_from_opening_px(double w_px, const ImageMeta& meta) {
  return w_px * 3.0 / double(meta.width - 1);
}
inline double opening_px_from_scale(double s, const ImageMeta& meta) {
  return s * double(meta.width - 1) / 3.0;
}

inline CascadeParams cascade_from_grasp(const GraspConfig& g, const ImageMeta& meta,
                                        const DatasetStats& stats) {
  require_square(meta, "cascade_from_grasp");
  CascadeParams p;
  p.t = AffineParams::translation(0.5 * pixel_to_norm_d(g.x, meta.width),
                                  0.5 * pixel_to_norm_d(g.y, meta.height));
  p.r = AffineParams::rotation(GraspConfig::canonical_angle(g.theta));
  p.c = AffineParams::scale(scale_from_opening_px(g.w / meta.pixel_scale, meta));
  p.z_raw = (g.z - stats.z_mean) / stats.z_std;
  return p;
}

inline GraspConfig grasp_from_cascade(const CascadeParams& p, const DatasetStats& stats,
                                      const ImageMeta& meta) {
  require_square(meta, "grasp_from_cascade");
  auto m = compose_cascade(p.t, p.r, p.c);
  GraspConfig g;
  g.x = norm_to_pixel(m[2], meta.width);
  g.y = norm_to_pixel(m[5], meta.height);
  g.theta = GraspConfig::canonical_angle(p.r.raw[0]);
  g.w = opening_px_from_scale(p.c.raw[0], meta) * meta.pixel_scale;
  g.z = p.z_raw * stats.z_std + stats.z_mean;
  return g;
}

// Rotation-aligned 32x32 crop around a grasp, produced by the exact same
// sequential STN sampling path used at training time (translate, rotate,
// scale). Border padding uses the table depth.
inline Tensor crop_for_classifier(const DepthImage& image, const GraspConfig& g,
                                  const DatasetStats& stats) {
  const ImageMeta& meta = image.meta;
  require_square(meta, "crop_for_classifier");
  if (g.x < 0 || g.x > double(meta.width - 1) || g.y < 0 || g.y > double(meta.height - 1))
    throw TensorError("crop_for_classifier: grasp center outside image");
  CascadeParams p = cascade_from_grasp(g, meta, stats);
  double bg = meta.table_depth();
  Tensor img = depth_tensor(image);
  Tensor o1 = bilinear_sample(img, affine_grid(p.t, meta.height, meta.width), bg);
  Tensor o2 = bilinear_sample(o1, affine_grid(p.r, meta.height, meta.width), bg);
  return bilinear_sample(o2, affine_grid(p.c, kCropSize, kCropSize), bg);
}

// ---- rectangle metric ----

struct MetricResult {
  bool positive = false;
  double best_iou = 0.0;
  double angle_diff = 0.0;  // of the best-IoU ground truth, radians
};

inline constexpr double kAngleThreshold = 30.0 * kPi / 180.0;
inline constexpr double kIouThreshold = 0.25;

// Positive iff some ground truth is within 30 degrees (mod pi) AND has
// Jaccard index > 0.25; IoU computed by exact convex-polygon clipping.
inline MetricResult rect_metric(const RectGrasp& pred, const std::vector<RectGrasp>& gts) {
  if (gts.empty()) throw TensorError("rect_metric: empty ground-truth list");
  MetricResult res;
  Polygon pp = rect_polygon(pred);
  for (const auto& gt : gts) {
    double iou = polygon_iou(pp, rect_polygon(gt));
    double ad = angle_diff_mod_pi(pred.angle, gt.angle);
    if (iou > res.best_iou || (iou == res.best_iou && ad < res.angle_diff)) {
      res.best_iou = iou;
      res.angle_diff = ad;
    }
    if (ad < kAngleThreshold && iou > kIouThreshold) res.positive = true;
  }
  return res;
}

}  // namespace gqstn
