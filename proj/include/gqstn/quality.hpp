#pragma once

#include <algorithm>

#include "gqstn/checkpoint.hpp"
#include "gqstn/optim.hpp"
#include "gqstn/scenegen.hpp"

namespace gqstn {

// Binary grasp-robustness classifier over rotation-aligned 32x32 crops plus
// the normalized gripper height as a constant second input plane. Trained on
// oracle labels, then frozen and used both as the training supervisor and as
// the evaluation metric.

inline BackboneConfig quality_backbone_config() {
  BackboneConfig cfg;
  cfg.input_h = kCropSize;
  cfg.input_w = kCropSize;
  cfg.in_channels = 2;
  cfg.channels = {8, 16, 32};
  cfg.residual = true;
  cfg.head_dim = 1;
  return cfg;
}

struct QualityConfig {
  BackboneConfig backbone = quality_backbone_config();
  int epochs = 4;
  double lr = 1e-3;
  int batch = 16;
  AdamConfig adam;
  double val_frac = 0.1;
  double threshold = 0.5;
};

struct QualityModel {
  Backbone net;
  double threshold = 0.5;
  double table_depth = 0.70;
  double camera_height = 0.70;
  bool frozen = false;

  void freeze() {
    net.params().set_requires_grad(false);
    frozen = true;
  }
};

// Two-plane input: standardized depth crop and a constant z plane. Gradient
// flows into both the crop and z, which is what detector training relies on.
inline Tensor classifier_input(const QualityModel& m, const Tensor& crop, const Tensor& z_raw) {
  if (crop.shape() != Shape{kCropSize, kCropSize})
    throw TensorError("classifier_input: expected " + std::to_string(kCropSize) + "x" +
                      std::to_string(kCropSize) + " crop, got " + shape_str(crop.shape()));
  Tensor norm = mul(sub(crop, m.table_depth), 1.0 / m.camera_height);
  Tensor ch0 = reshape(norm, {1, kCropSize, kCropSize});
  Tensor plane = mul(z_raw, Tensor::full({1, kCropSize, kCropSize}, 1.0));
  return concat0(ch0, plane);
}

// (logit tensor, p_robust). Differentiable w.r.t. crop and z even when the
// model is frozen.
inline std::pair<Tensor, double> classify(const QualityModel& m, const Tensor& crop,
                                          const Tensor& z_raw) {
  Tensor logit = select(m.net.forward(classifier_input(m, crop, z_raw)), 0);
  double p = 1.0 / (1.0 + std::exp(-logit.item()));
  return {logit, p};
}

// Strict inequality: a tie at the threshold is conservatively not robust.
inline bool robust_label(const QualityModel& m, const Tensor& crop, const Tensor& z_raw,
                         double threshold = 0.5) {
  return classify(m, crop, z_raw).second > threshold;
}

// ---- crop-level dataset ----

struct CropExample {
  std::vector<double> crop;  // raw depths, meters
  double z_raw = 0;          // (z - z_mean) / z_std
  bool label = false;
};

inline std::vector<CropExample> crop_examples(const std::vector<SceneRecord>& records,
                                              const DatasetStats& stats) {
  std::vector<CropExample> out;
  for (const auto& rec : records)
    for (const auto& a : rec.annotations) {
      Tensor crop = crop_for_classifier(rec.depth, a.grasp, stats);
      out.push_back({crop.data(), (a.grasp.z - stats.z_mean) / stats.z_std, a.robust});
    }
  return out;
}

struct ClassifierReport {
  double accuracy = 0, precision = 0, recall = 0;
  int64_t n_train = 0, n_val = 0;
  std::vector<double> epoch_loss;
};

inline std::pair<QualityModel, ClassifierReport> train_classifier(
    std::vector<CropExample> examples, const QualityConfig& cfg, uint64_t seed,
    const ImageMeta& meta) {
  int64_t pos = 0;
  for (const auto& e : examples) pos += e.label ? 1 : 0;
  if (pos == 0 || pos == int64_t(examples.size()))
    throw TensorError("train_classifier: training set contains a single class");

  Rng rng(derive_seed(seed, 0));
  for (size_t i = examples.size(); i > 1; --i)
    std::swap(examples[i - 1], examples[size_t(rng.uniform_int(0, int64_t(i) - 1))]);
  size_t n_val = std::max<size_t>(1, size_t(double(examples.size()) * cfg.val_frac));
  size_t n_train = examples.size() - n_val;

  QualityModel model;
  model.net = Backbone(cfg.backbone, derive_seed(seed, 1));
  model.threshold = cfg.threshold;
  model.table_depth = meta.table_depth();
  model.camera_height = meta.camera_height;

  Adam opt(cfg.adam);
  ClassifierReport rep;
  rep.n_train = int64_t(n_train);
  rep.n_val = int64_t(n_val);

  std::vector<size_t> order(n_train);
  for (size_t i = 0; i < n_train; ++i) order[i] = i;
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    Rng erng(derive_seed(seed, 100 + uint64_t(ep)));
    for (size_t i = n_train; i > 1; --i)
      std::swap(order[i - 1], order[size_t(erng.uniform_int(0, int64_t(i) - 1))]);
    double ep_loss = 0;
    for (size_t b = 0; b < n_train; b += size_t(cfg.batch)) {
      size_t hi = std::min(n_train, b + size_t(cfg.batch));
      model.net.params().zero_grad();
      for (size_t i = b; i < hi; ++i) {
        const CropExample& ex = examples[order[i]];
        Tensor crop({kCropSize, kCropSize}, ex.crop);
        Tensor logit = classify(model, crop, Tensor::scalar(ex.z_raw)).first;
        Tensor loss = mul(binary_cross_entropy_with_logits(
                              logit, Tensor::scalar(ex.label ? 1.0 : 0.0)),
                          1.0 / double(hi - b));
        if (!std::isfinite(loss.item()))
          throw TensorError("train_classifier: non-finite loss at epoch " +
                            std::to_string(ep));
        ep_loss += loss.item() * double(hi - b);
        loss.backward();
      }
      opt.step(model.net.params(), cfg.lr);
    }
    rep.epoch_loss.push_back(ep_loss / double(n_train));
  }

  int64_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (size_t i = n_train; i < examples.size(); ++i) {
    const CropExample& ex = examples[i];
    Tensor crop({kCropSize, kCropSize}, ex.crop);
    bool pred = robust_label(model, crop, Tensor::scalar(ex.z_raw), model.threshold);
    if (pred == ex.label) ++correct;
    if (pred && ex.label) ++tp;
    if (pred && !ex.label) ++fp;
    if (!pred && ex.label) ++fn;
  }
  rep.accuracy = double(correct) / double(n_val);
  rep.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
  rep.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  return {std::move(model), std::move(rep)};
}

// ---- checkpoint plumbing ----

inline void save_quality(const std::string& path, const QualityModel& m,
                         nlohmann::json extra_meta = {}) {
  nlohmann::json meta = std::move(extra_meta);
  meta["kind"] = "quality";
  meta["threshold"] = m.threshold;
  meta["table_depth"] = m.table_depth;
  meta["camera_height"] = m.camera_height;
  meta["channels"] = m.net.config().channels;
  meta["residual"] = m.net.config().residual;
  save_checkpoint(path, m.net.params(), meta);
}

inline QualityModel load_quality(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "quality")
    throw TensorError("load_quality: checkpoint at " + path + " is not a quality model");
  BackboneConfig cfg = quality_backbone_config();
  cfg.channels = ck.meta.at("channels").get<std::vector<int64_t>>();
  cfg.residual = ck.meta.at("residual").get<bool>();
  QualityModel m;
  m.net = Backbone(cfg, 0);
  load_into(m.net.params(), ck);
  m.threshold = ck.meta.at("threshold").get<double>();
  m.table_depth = ck.meta.at("table_depth").get<double>();
  m.camera_height = ck.meta.at("camera_height").get<double>();
  return m;
}

}  // namespace gqstn
