#pragma once

#include "gqstn/checkpoint.hpp"
#include "gqstn/grasp.hpp"
#include "gqstn/locnet.hpp"

namespace gqstn {

// One-shot grasp detector: a cascade of three constrained spatial
// transformers (translate, rotate, scale+z), each driven by its own small
// localization backbone. The intermediate grids are fully observable, so the
// predicted grasp is read directly off the constrained parameters.

struct DetectorConfig {
  BackboneConfig backbone;  // head_dim forced to 2 per stage
  bool literal_sigmoid = false;

  DetectorConfig() {
    backbone.head_dim = 2;
    backbone.flatten_head = true;  // localization needs absolute position
  }
};

// Localization backbones see depth relative to the table in camera-height
// units; the raw image stays in meters for sampling and cropping.
inline Tensor normalize_for_backbone(const Tensor& image, const ImageMeta& meta) {
  return mul(sub(image, meta.table_depth()), 1.0 / meta.camera_height);
}

// Raw head outputs plus mapped parameters and the final crop, all on the
// autodiff graph.
struct DetectorOutput {
  Tensor wx, wy, walpha, wbeta, ws, wz;  // raw scalars
  Tensor x, y, theta, s;                 // constrained parameters
  Tensor alpha, beta;                    // mapped rotation pair (loss targets)
  Tensor crop;                           // [32,32], meters
};

class GqstnDetector {
 public:
  GqstnDetector() = default;

  GqstnDetector(const DetectorConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.backbone.head_dim = 2;
    loc_t_ = Backbone(cfg_.backbone, derive_seed(seed, 1));
    loc_r_ = Backbone(cfg_.backbone, derive_seed(seed, 2));
    loc_s_ = Backbone(cfg_.backbone, derive_seed(seed, 3));
  }

  // Teacher forcing: downstream stages consume images transformed with the
  // ground-truth parameters (constants off the graph) instead of the
  // predicted ones, while every head still emits its own outputs.
  DetectorOutput forward(const Tensor& image, const ImageMeta& meta, const DatasetStats& stats,
                         const CascadeParams* teacher = nullptr) const {
    require_square(meta, "GqstnDetector::forward");
    double bg = meta.table_depth();
    int64_t h = meta.height, w = meta.width;

    DetectorOutput out;
    Tensor h_t = loc_t_.forward(normalize_for_backbone(image, meta));
    out.wx = select(h_t, 0);
    out.wy = select(h_t, 1);
    auto [x, y] = head_translation(out.wx, out.wy);
    out.x = x;
    out.y = y;
    Tensor in_r = teacher
                      ? bilinear_sample(image, affine_grid(teacher->t, h, w), bg)
                      : affine_sample(image, translation_matrix(out.x, out.y), h, w, bg);

    Tensor h_r = loc_r_.forward(normalize_for_backbone(in_r, meta));
    out.walpha = select(h_r, 0);
    out.wbeta = select(h_r, 1);
    out.alpha = cfg_.literal_sigmoid ? sigmoid(out.walpha)
                                     : sub(mul(sigmoid(out.walpha), 2.0), 1.0);
    out.beta = cfg_.literal_sigmoid ? sigmoid(out.wbeta)
                                    : sub(mul(sigmoid(out.wbeta), 2.0), 1.0);
    out.theta = mul(atan2(out.alpha, out.beta), 0.5);
    Tensor in_s = teacher
                      ? bilinear_sample(in_r, affine_grid(teacher->r, h, w), bg)
                      : affine_sample(in_r, rotation_matrix(out.theta), h, w, bg);

    Tensor h_s = loc_s_.forward(normalize_for_backbone(in_s, meta));
    out.ws = select(h_s, 0);
    out.wz = select(h_s, 1);
    auto [s, z] = head_scale_z(out.ws, out.wz, stats);
    out.s = s;
    (void)z;  // out.wz is the normalized height directly
    out.crop = affine_sample(in_s, scale_matrix(out.s), kCropSize, kCropSize, bg);
    return out;
  }

  // Detected grasp in input-image coordinates, off-graph.
  GraspConfig grasp(const DetectorOutput& o, const ImageMeta& meta,
                    const DatasetStats& stats) const {
    CascadeParams p;
    p.t = AffineParams::translation(o.x.item(), o.y.item());
    p.r = AffineParams::rotation(o.theta.item());
    p.c = AffineParams::scale(o.s.item());
    p.z_raw = o.wz.item();
    return grasp_from_cascade(p, stats, meta);
  }

  ModelParams all_params() {
    ModelParams all;
    for (auto* net : {&loc_t_, &loc_r_, &loc_s_}) {
      const char* prefix = net == &loc_t_ ? "trans." : net == &loc_r_ ? "rot." : "scale.";
      for (auto& [name, t] : net->params().named) all.named.emplace_back(prefix + name, t);
    }
    return all;  // tensors are shared views, not copies
  }

  const DetectorConfig& config() const { return cfg_; }
  Backbone& loc_t() { return loc_t_; }
  Backbone& loc_r() { return loc_r_; }
  Backbone& loc_s() { return loc_s_; }

 private:
  DetectorConfig cfg_;
  Backbone loc_t_, loc_r_, loc_s_;
};

// Direct-regression baseline: one backbone of the same family emits all six
// raw outputs (w_x, w_y, w_alpha, w_beta, w_s, w_z) in a single pass.
class DirectGraspModel {
 public:
  DirectGraspModel() = default;

  DirectGraspModel(const DetectorConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.backbone.head_dim = 6;
    net_ = Backbone(cfg_.backbone, derive_seed(seed, 1));
  }

  DetectorOutput forward(const Tensor& image, const ImageMeta& meta,
                         const DatasetStats& stats) const {
    require_square(meta, "DirectGraspModel::forward");
    Tensor h = net_.forward(normalize_for_backbone(image, meta));
    DetectorOutput out;
    out.wx = select(h, 0);
    out.wy = select(h, 1);
    out.walpha = select(h, 2);
    out.wbeta = select(h, 3);
    out.ws = select(h, 4);
    out.wz = select(h, 5);
    auto [x, y] = head_translation(out.wx, out.wy);
    out.x = x;
    out.y = y;
    out.alpha = cfg_.literal_sigmoid ? sigmoid(out.walpha)
                                     : sub(mul(sigmoid(out.walpha), 2.0), 1.0);
    out.beta = cfg_.literal_sigmoid ? sigmoid(out.wbeta)
                                    : sub(mul(sigmoid(out.wbeta), 2.0), 1.0);
    out.theta = mul(atan2(out.alpha, out.beta), 0.5);
    out.s = head_scale_z(out.ws, out.wz, stats).first;
    return out;  // no crop: the baseline never samples
  }

  GraspConfig grasp(const DetectorOutput& o, const ImageMeta& meta,
                    const DatasetStats& stats) const {
    CascadeParams p;
    p.t = AffineParams::translation(o.x.item(), o.y.item());
    p.r = AffineParams::rotation(o.theta.item());
    p.c = AffineParams::scale(o.s.item());
    p.z_raw = o.wz.item();
    return grasp_from_cascade(p, stats, meta);
  }

  ModelParams& params() { return net_.params(); }
  const ModelParams& params() const { return net_.params(); }
  const DetectorConfig& config() const { return cfg_; }

 private:
  DetectorConfig cfg_;
  Backbone net_;
};

// ---- checkpoint plumbing ----

inline nlohmann::json backbone_meta(const BackboneConfig& cfg) {
  return {{"input_h", cfg.input_h}, {"input_w", cfg.input_w},
          {"in_channels", cfg.in_channels}, {"channels", cfg.channels},
          {"residual", cfg.residual}, {"flatten_head", cfg.flatten_head},
          {"head_dim", cfg.head_dim}};
}

inline BackboneConfig backbone_from_meta(const nlohmann::json& j) {
  BackboneConfig cfg;
  cfg.input_h = j.at("input_h").get<int64_t>();
  cfg.input_w = j.at("input_w").get<int64_t>();
  cfg.in_channels = j.at("in_channels").get<int64_t>();
  cfg.channels = j.at("channels").get<std::vector<int64_t>>();
  cfg.residual = j.at("residual").get<bool>();
  cfg.flatten_head = j.at("flatten_head").get<bool>();
  cfg.head_dim = j.at("head_dim").get<int64_t>();
  return cfg;
}

inline void save_detector(const std::string& path, GqstnDetector& model,
                          nlohmann::json extra_meta = {}) {
  nlohmann::json meta = std::move(extra_meta);
  meta["kind"] = "gqstn";
  meta["backbone"] = backbone_meta(model.config().backbone);
  meta["literal_sigmoid"] = model.config().literal_sigmoid;
  ModelParams all = model.all_params();
  save_checkpoint(path, all, meta);
}

inline GqstnDetector load_detector(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "gqstn")
    throw TensorError("load_detector: checkpoint at " + path + " is not a gqstn detector");
  DetectorConfig cfg;
  cfg.backbone = backbone_from_meta(ck.meta.at("backbone"));
  cfg.literal_sigmoid = ck.meta.at("literal_sigmoid").get<bool>();
  GqstnDetector model(cfg, 0);
  ModelParams all = model.all_params();
  load_into(all, ck);
  return model;
}

inline void save_directgrasp(const std::string& path, const DirectGraspModel& model,
                             nlohmann::json extra_meta = {}) {
  nlohmann::json meta = std::move(extra_meta);
  meta["kind"] = "directgrasp";
  meta["backbone"] = backbone_meta(model.config().backbone);
  meta["literal_sigmoid"] = model.config().literal_sigmoid;
  save_checkpoint(path, model.params(), meta);
}

inline DirectGraspModel load_directgrasp(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "directgrasp")
    throw TensorError("load_directgrasp: checkpoint at " + path + " is not a directgrasp model");
  DetectorConfig cfg;
  cfg.backbone = backbone_from_meta(ck.meta.at("backbone"));
  cfg.backbone.head_dim = 6;
  cfg.literal_sigmoid = ck.meta.at("literal_sigmoid").get<bool>();
  DirectGraspModel model(cfg, 0);
  load_into(model.params(), ck);
  return model;
}

}  // namespace gqstn
