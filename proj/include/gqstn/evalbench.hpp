#pragma once

#include <chrono>
#include <functional>

#include "gqstn/detector.hpp"
#include "gqstn/quality.hpp"

namespace gqstn {

// A detection ready for scoring: a grasp plus, when the detector produced its
// own aligned crop (GQ-STN), that crop so robustness is judged on exactly
// what the network saw.
struct Detection {
  GraspConfig grasp;
  Tensor crop;    // optional; undefined => re-crop from the image
  double z_raw = 0;
};

using DetectorFn = std::function<Detection(const DepthImage&)>;

inline DetectorFn gqstn_detector_fn(const GqstnDetector& model, const DatasetStats& stats) {
  return [&model, stats](const DepthImage& im) {
    DetectorOutput o = model.forward(depth_tensor(im), im.meta, stats);
    return Detection{model.grasp(o, im.meta, stats), o.crop, o.wz.item()};
  };
}

inline DetectorFn directgrasp_detector_fn(const DirectGraspModel& model,
                                          const DatasetStats& stats) {
  return [&model, stats](const DepthImage& im) {
    DetectorOutput o = model.forward(depth_tensor(im), im.meta, stats);
    return Detection{model.grasp(o, im.meta, stats), Tensor(), o.wz.item()};
  };
}

struct EvalReport {
  double rect_precision = 0;    // percent
  double robust_precision = 0;  // percent
  // four-way disagreement breakdown, percents partitioning the set
  double rect_pos_robust_neg = 0, rect_pos_robust_pos = 0;
  double rect_neg_robust_pos = 0, rect_neg_robust_neg = 0;
  double mean_detect_time_sec = 0;
  std::vector<nlohmann::json> per_scene;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rect_precision"] = rect_precision;
    j["robust_precision"] = robust_precision;
    j["disagreement"] = {{"rect+robust-", rect_pos_robust_neg},
                         {"rect+robust+", rect_pos_robust_pos},
                         {"rect-robust+", rect_neg_robust_pos},
                         {"rect-robust-", rect_neg_robust_neg}};
    j["mean_detect_time_sec"] = mean_detect_time_sec;
    j["scenes"] = per_scene;
    return j;
  }
};

// One forward detection per scene; rectangle metric against the positive
// annotations, robustness via the frozen classifier. Baselines without a
// native crop are re-cropped with crop_for_classifier around their
// prediction (using the predicted w).
inline EvalReport eval_detector(const DetectorFn& detect, const std::vector<SceneRecord>& scenes,
                                const DatasetStats& stats, const QualityModel& quality) {
  if (scenes.empty()) throw TensorError("eval_detector: empty scene list");
  EvalReport rep;
  int64_t rect_pos = 0, robust_pos = 0;
  int64_t quad[2][2] = {{0, 0}, {0, 0}};
  double total_time = 0;
  for (size_t idx = 0; idx < scenes.size(); ++idx) {
    const SceneRecord& rec = scenes[idx];
    auto t0 = std::chrono::steady_clock::now();
    Detection det = detect(rec.depth);
    total_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<RectGrasp> gts;
    for (const auto& a : rec.annotations)
      if (a.robust) gts.push_back(rect_from_grasp(a.grasp, rec.depth.meta));
    MetricResult mr = rect_metric(rect_from_grasp(det.grasp, rec.depth.meta), gts);

    Tensor crop = det.crop.defined()
                      ? det.crop
                      : crop_for_classifier(rec.depth, det.grasp, stats);
    bool robust = robust_label(quality, crop, Tensor::scalar(det.z_raw), quality.threshold);

    rect_pos += mr.positive;
    robust_pos += robust;
    ++quad[mr.positive ? 1 : 0][robust ? 1 : 0];
    rep.per_scene.push_back({{"scene", idx}, {"x", det.grasp.x}, {"y", det.grasp.y},
                             {"theta", det.grasp.theta}, {"w", det.grasp.w},
                             {"z", det.grasp.z}, {"rect_positive", mr.positive},
                             {"best_iou", mr.best_iou}, {"robust", robust}});
  }
  double n = double(scenes.size());
  rep.rect_precision = 100.0 * double(rect_pos) / n;
  rep.robust_precision = 100.0 * double(robust_pos) / n;
  rep.rect_pos_robust_neg = 100.0 * double(quad[1][0]) / n;
  rep.rect_pos_robust_pos = 100.0 * double(quad[1][1]) / n;
  rep.rect_neg_robust_pos = 100.0 * double(quad[0][1]) / n;
  rep.rect_neg_robust_neg = 100.0 * double(quad[0][0]) / n;
  rep.mean_detect_time_sec = total_time / n;
  return rep;
}

// ---- proposal + classification baseline ----

struct BaselineConfig {
  int k = 1000;
  double grad_threshold = 0.004;      // meters/pixel depth step marking an edge
  double perp_tol = 20.0 * kPi / 180.0;
  double max_opening = 0.05;          // meters
  double z_fraction = 0.3;            // gripper height as fraction of object height
};

struct BaselineResult {
  GraspConfig grasp;
  double p_robust = 0;
};

// Index of the highest-p_robust candidate; first of ties wins, so the argmax
// is invariant under appending duplicates.
inline size_t rank_candidates(const DepthImage& image, const QualityModel& quality,
                              const DatasetStats& stats,
                              const std::vector<GraspConfig>& candidates) {
  if (candidates.empty()) throw TensorError("rank_candidates: empty candidate list");
  size_t best = 0;
  double best_p = -1.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    Tensor crop = crop_for_classifier(image, candidates[i], stats);
    double z_raw = (candidates[i].z - stats.z_mean) / stats.z_std;
    double p = classify(quality, crop, Tensor::scalar(z_raw)).second;
    if (p > best_p) {
      best_p = p;
      best = i;
    }
  }
  return best;
}

// Samples K antipodal candidates from opposing depth-gradient pixels, ranks
// them all with the frozen classifier, returns the argmax (first of ties).
inline BaselineResult prop_classify_baseline(const DepthImage& image,
                                             const QualityModel& quality,
                                             const DatasetStats& stats,
                                             const BaselineConfig& cfg, uint64_t seed) {
  if (cfg.k < 1) throw TensorError("prop_classify_baseline: K must be >= 1");
  const ImageMeta& meta = image.meta;
  int64_t h = meta.height, w = meta.width;
  auto depth_at = [&](int64_t i, int64_t j) { return image.depth[size_t(i * w + j)]; };

  // central-difference depth gradient; edges are where the surface steps
  struct EdgePx {
    double x, y, gx, gy;
  };
  std::vector<EdgePx> edges;
  for (int64_t i = 1; i < h - 1; ++i)
    for (int64_t j = 1; j < w - 1; ++j) {
      double gx = (depth_at(i, j + 1) - depth_at(i, j - 1)) / 2.0;
      double gy = (depth_at(i + 1, j) - depth_at(i - 1, j)) / 2.0;
      if (std::sqrt(gx * gx + gy * gy) > cfg.grad_threshold)
        edges.push_back({double(j), double(i), gx, gy});
    }
  if (edges.size() < 2) throw TensorError("prop_classify_baseline: no depth edges found");

  Rng rng(seed);
  double max_px = cfg.max_opening / meta.pixel_scale;
  std::vector<GraspConfig> candidates;
  const int64_t kMaxTries = int64_t(cfg.k) * 400;
  for (int64_t t = 0; t < kMaxTries && int(candidates.size()) < cfg.k; ++t) {
    const EdgePx& a = edges[size_t(rng.uniform_int(0, int64_t(edges.size()) - 1))];
    const EdgePx& b = edges[size_t(rng.uniform_int(0, int64_t(edges.size()) - 1))];
    double dx = b.x - a.x, dy = b.y - a.y;
    double dist = std::sqrt(dx * dx + dy * dy);
    if (dist < 2.0 || dist > max_px) continue;
    double inv = 1.0 / dist;
    // gradients point outward (off the object); antipodal means each aligns
    // with the line toward the other contact within the tolerance
    auto angle_to = [&](double gx, double gy, double ux, double uy) {
      double n = std::sqrt(gx * gx + gy * gy);
      double c = std::clamp((gx * ux + gy * uy) / n, -1.0, 1.0);
      return std::acos(c);
    };
    if (angle_to(a.gx, a.gy, -dx * inv, -dy * inv) > cfg.perp_tol) continue;
    if (angle_to(b.gx, b.gy, dx * inv, dy * inv) > cfg.perp_tol) continue;
    GraspConfig g;
    g.x = (a.x + b.x) / 2.0;
    g.y = (a.y + b.y) / 2.0;
    g.theta = GraspConfig::canonical_angle(std::atan2(dy, dx));
    g.w = std::min(cfg.max_opening, dist * meta.pixel_scale * 1.5);
    int64_t mi = int64_t(std::lround(g.y)), mj = int64_t(std::lround(g.x));
    double height = std::max(0.0, meta.table_depth() - depth_at(mi, mj));
    g.z = cfg.z_fraction * height;
    candidates.push_back(g);
  }
  if (candidates.empty())
    throw TensorError("prop_classify_baseline: no antipodal candidates found");

  size_t best = rank_candidates(image, quality, stats, candidates);
  Tensor crop = crop_for_classifier(image, candidates[best], stats);
  double z_raw = (candidates[best].z - stats.z_mean) / stats.z_std;
  return {candidates[best], classify(quality, crop, Tensor::scalar(z_raw)).second};
}

// ---- timing ----

struct TimingStats {
  double median_sec = 0, p95_sec = 0, mean_sec = 0;
  int reps = 0;
};

// Single-threaded wall clock around fn, excluding setup; run warmup first.
inline TimingStats timing_bench(const std::function<void()>& fn, int warmup, int reps) {
  if (reps < 10) throw TensorError("timing_bench: need reps >= 10");
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> times(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    times[size_t(i)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::sort(times.begin(), times.end());
  TimingStats st;
  st.reps = reps;
  st.median_sec = times[size_t(reps / 2)];
  st.p95_sec = times[size_t(std::min<int>(reps - 1, int(std::ceil(0.95 * reps)) - 1))];
  double sum = 0;
  for (double t : times) sum += t;
  st.mean_sec = sum / double(reps);
  return st;
}

// Least-squares R^2 of time vs K, for the linear-scaling check.
inline double linear_fit_r2(const std::vector<double>& xs, const std::vector<double>& ys) {
  size_t n = xs.size();
  if (n < 2 || ys.size() != n) throw TensorError("linear_fit_r2: need >= 2 points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

}  // namespace gqstn
