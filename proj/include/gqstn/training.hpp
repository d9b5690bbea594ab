#pragma once

#include <filesystem>
#include <fstream>

#include "gqstn/detector.hpp"
#include "gqstn/optim.hpp"
#include "gqstn/quality.hpp"

namespace gqstn {

// ---- schedule ----

struct Phase {
  int epochs = 0;
  double xi = 0.0;  // loss mix: L_tot = xi*L_loc + (1-xi)*L_rob
  double lr = 1e-3;
  bool teacher_forcing = false;
};

struct Schedule {
  std::vector<Phase> phases;
  AdamConfig adam;  // carries the L2 regularization factor
  int batch = 16;
  int early_stop_patience = 3;  // evaluations of validation robust rate

  void validate() const {
    double prev = 1.0 + 1e-12;
    for (const auto& p : phases) {
      if (p.xi < 0 || p.xi > 1) throw TensorError("Schedule: xi outside [0,1]");
      if (p.xi > prev) throw TensorError("Schedule: xi must be non-increasing");
      if (p.xi == 0.0 && p.teacher_forcing)
        throw TensorError("Schedule: teacher forcing requires xi > 0");
      prev = p.xi;
    }
    if (batch < 1) throw TensorError("Schedule: batch must be >= 1");
  }

  // The published phase ladder; epoch counts scale by one multiplier for
  // desk-sized runs (minimum one epoch per phase with a nonzero count).
  static Schedule paper_default(double epoch_multiplier = 1.0) {
    auto ep = [&](int n) { return std::max(1, int(std::lround(n * epoch_multiplier))); };
    Schedule s;
    s.phases = {{ep(6), 1.0, 1e-3, true},
                {ep(3), 0.5, 2e-4, true},
                {ep(3), 0.2, 4e-5, true},
                {ep(9), 0.0, 4e-5, false},
                {ep(4), 0.0, 8e-6, false}};
    return s;
  }

  // Ablation: no geometric bootstrap, robustness loss from the start.
  static Schedule no_bootstrap(double epoch_multiplier = 1.0) {
    Schedule s = paper_default(epoch_multiplier);
    for (auto& p : s.phases) {
      p.xi = 0.0;
      p.teacher_forcing = false;
    }
    return s;
  }
};

// ---- losses ----

struct LossMix {
  double xi = 1.0;
  double l_loc = 0, l_rob = 0, l_tot = 0;
};

// Sum of squared errors on the mapped head outputs against the encoded
// ground-truth cascade: (x, y), (alpha, beta) vs (sin 2theta, cos 2theta),
// raw w_s vs log(s_gt/gamma), raw w_z vs the normalized height.
inline Tensor loc_loss(const DetectorOutput& o, const CascadeParams& target,
                       const DatasetStats& stats) {
  double theta_gt = target.r.raw[0];
  double s_gt = target.c.raw[0];
  auto sq = [](const Tensor& d) { return mul(d, d); };
  Tensor l = sq(sub(o.x, target.t.raw[0]));
  l = add(l, sq(sub(o.y, target.t.raw[1])));
  l = add(l, sq(sub(o.alpha, std::sin(2.0 * theta_gt))));
  l = add(l, sq(sub(o.beta, std::cos(2.0 * theta_gt))));
  l = add(l, sq(sub(o.ws, std::log(s_gt / stats.gamma))));
  l = add(l, sq(sub(o.wz, target.z_raw)));
  return l;
}

// Cross-entropy against the positive label on the frozen classifier's logit;
// the gradient flows through the crop into all three localization heads.
inline Tensor rob_loss(const QualityModel& quality, const Tensor& crop, const Tensor& z_raw) {
  Tensor logit = classify(quality, crop, z_raw).first;
  return binary_cross_entropy_with_logits(logit, Tensor::scalar(1.0));
}

// ---- training loops ----

struct TrainOptions {
  std::string history_path;    // JSON-lines sink; empty = keep in memory only
  std::string checkpoint_dir;  // per-phase-boundary checkpoints; empty = none
};

struct TrainState {
  Adam opt;
  int start_phase = 0;
  int global_epoch = 0;
  double best_val = -1.0;
  int bad_evals = 0;
  bool stopped = false;
};

struct TrainResult {
  std::vector<std::string> history;  // JSON lines, in emit order
  double final_val_robust = -1.0;    // fraction, -1 if never evaluated
  bool early_stopped = false;
};

namespace detail {

inline void emit(TrainResult& res, std::ofstream* sink, const nlohmann::json& j) {
  res.history.push_back(j.dump());
  if (sink) *sink << res.history.back() << "\n";
}

inline const Annotation& pick_positive(const SceneRecord& rec, uint64_t seed,
                                       uint64_t scene_index) {
  std::vector<const Annotation*> pos;
  for (const auto& a : rec.annotations)
    if (a.robust) pos.push_back(&a);
  if (pos.empty()) throw TensorError("training: scene without positive annotations");
  Rng rng(derive_seed(seed, scene_index));
  return *pos[size_t(rng.uniform_int(0, int64_t(pos.size()) - 1))];
}

inline void check_finite(const DetectorOutput& o, double l_loc, double l_rob, int phase,
                         int64_t step) {
  const char* bad = nullptr;
  if (!std::isfinite(o.wx.item())) bad = "trans.w_x";
  else if (!std::isfinite(o.wy.item())) bad = "trans.w_y";
  else if (!std::isfinite(o.walpha.item())) bad = "rot.w_alpha";
  else if (!std::isfinite(o.wbeta.item())) bad = "rot.w_beta";
  else if (!std::isfinite(o.ws.item())) bad = "scale.w_s";
  else if (!std::isfinite(o.wz.item())) bad = "scale.w_z";
  else if (!std::isfinite(l_loc)) bad = "L_loc";
  else if (!std::isfinite(l_rob)) bad = "L_rob";
  if (bad)
    throw TensorError("training: non-finite value in " + std::string(bad) + " at phase " +
                      std::to_string(phase) + ", step " + std::to_string(step));
}

}  // namespace detail

// Validation robust-prediction rate: fraction of scenes where the frozen
// classifier calls the detector's own crop robust.
inline double val_robust_rate(const GqstnDetector& model, const std::vector<SceneRecord>& val,
                              const DatasetStats& stats, const QualityModel& quality) {
  if (val.empty()) return -1.0;
  int64_t robust = 0;
  for (const auto& rec : val) {
    DetectorOutput o = model.forward(depth_tensor(rec.depth), rec.depth.meta, stats);
    if (robust_label(quality, o.crop, o.wz, quality.threshold)) ++robust;
  }
  return double(robust) / double(val.size());
}

inline TrainResult train_gqstn(GqstnDetector& model, const std::vector<SceneRecord>& train,
                               const std::vector<SceneRecord>& val, const DatasetStats& stats,
                               const QualityModel& quality, const Schedule& schedule,
                               uint64_t seed, const TrainOptions& opts = {},
                               TrainState* state_in = nullptr) {
  schedule.validate();
  if (!quality.frozen) throw TensorError("train_gqstn: quality model must be frozen");
  uint64_t quality_checksum = quality.net.params().checksum();

  TrainState local;
  TrainState& st = state_in ? *state_in : local;
  TrainResult res;
  std::ofstream sink;
  std::ofstream* sinkp = nullptr;
  if (!opts.history_path.empty()) {
    sink.open(opts.history_path, st.start_phase > 0 ? std::ios::app : std::ios::trunc);
    if (!sink) throw TensorError("train_gqstn: cannot open " + opts.history_path);
    sinkp = &sink;
  }

  ModelParams params = model.all_params();
  bool final_phase_seen = false;
  int64_t step = st.opt.step_count();

  for (int p = st.start_phase; p < int(schedule.phases.size()) && !st.stopped; ++p) {
    const Phase& phase = schedule.phases[p];
    bool is_final = p + 1 == int(schedule.phases.size());
    final_phase_seen = final_phase_seen || is_final;
    for (int e = 0; e < phase.epochs && !st.stopped; ++e, ++st.global_epoch) {
      // deterministic per-epoch scene order
      std::vector<size_t> order(train.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng orng(derive_seed(seed, 1000 + uint64_t(st.global_epoch)));
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(orng.uniform_int(0, int64_t(i) - 1))]);

      for (size_t b = 0; b < order.size(); b += size_t(schedule.batch)) {
        size_t hi = std::min(order.size(), b + size_t(schedule.batch));
        params.zero_grad();
        double sum_loc = 0, sum_rob = 0, sum_tot = 0;
        for (size_t i = b; i < hi; ++i) {
          const SceneRecord& rec = train[order[i]];
          const Annotation& ann = detail::pick_positive(
              rec, derive_seed(seed, 2000 + uint64_t(st.global_epoch)), uint64_t(order[i]));
          CascadeParams target = cascade_from_grasp(ann.grasp, rec.depth.meta, stats);
          DetectorOutput o = model.forward(depth_tensor(rec.depth), rec.depth.meta, stats,
                                           phase.teacher_forcing ? &target : nullptr);
          Tensor l_loc = loc_loss(o, target, stats);
          Tensor l_rob = rob_loss(quality, o.crop, o.wz);
          Tensor l_tot = add(mul(l_loc, phase.xi), mul(l_rob, 1.0 - phase.xi));
          detail::check_finite(o, l_loc.item(), l_rob.item(), p, step);
          sum_loc += l_loc.item();
          sum_rob += l_rob.item();
          sum_tot += l_tot.item();
          mul(l_tot, 1.0 / double(hi - b)).backward();
        }
        st.opt.step(params, phase.lr);
        ++step;
        double n = double(hi - b);
        detail::emit(res, sinkp,
                     {{"type", "step"}, {"step", step}, {"phase", p}, {"xi", phase.xi},
                      {"lr", phase.lr}, {"teacher_forcing", phase.teacher_forcing},
                      {"L_loc", sum_loc / n}, {"L_rob", sum_rob / n},
                      {"L_tot", sum_tot / n}});
      }

      double vr = val_robust_rate(model, val, stats, quality);
      if (vr >= 0) {
        res.final_val_robust = vr;
        detail::emit(res, sinkp, {{"type", "eval"}, {"phase", p},
                                  {"epoch", st.global_epoch}, {"val_robust", vr}});
        if (is_final) {
          if (vr > st.best_val + 1e-12) {
            st.best_val = vr;
            st.bad_evals = 0;
          } else if (++st.bad_evals >= schedule.early_stop_patience) {
            st.stopped = true;
            res.early_stopped = true;
            detail::emit(res, sinkp, {{"type", "early_stop"}, {"phase", p},
                                      {"epoch", st.global_epoch}, {"best_val", st.best_val}});
          }
        }
      }
    }

    if (!opts.checkpoint_dir.empty()) {
      nlohmann::json meta_j = {{"phase_completed", p}, {"global_epoch", st.global_epoch},
                               {"seed", seed}, {"best_val", st.best_val},
                               {"bad_evals", st.bad_evals}, {"stopped", st.stopped},
                               {"opt_step", st.opt.step_count()}};
      std::string path =
          opts.checkpoint_dir + "/phase" + std::to_string(p) + ".gqtn";
      // append optimizer moments so a resumed run is bit-compatible
      ModelParams with_opt = model.all_params();
      auto& m1 = st.opt.moments1();
      auto& m2 = st.opt.moments2();
      for (size_t i = 0; i < m1.size(); ++i) {
        Shape shape = params.named[i].second.shape();
        with_opt.named.emplace_back("adam.m." + params.named[i].first, Tensor(shape, m1[i]));
        with_opt.named.emplace_back("adam.v." + params.named[i].first, Tensor(shape, m2[i]));
      }
      meta_j["kind"] = "gqstn";
      meta_j["backbone"] = backbone_meta(model.config().backbone);
      meta_j["literal_sigmoid"] = model.config().literal_sigmoid;
      save_checkpoint(path, with_opt, meta_j);
    }
  }

  if (quality.net.params().checksum() != quality_checksum)
    throw TensorError("train_gqstn: frozen quality model was mutated");
  (void)final_phase_seen;
  return res;
}

// Restore model + optimizer + schedule position from a phase checkpoint
// written by train_gqstn. Returns the state to pass back into train_gqstn.
inline TrainState resume_gqstn(const std::string& path, GqstnDetector& model) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "gqstn")
    throw TensorError("resume_gqstn: not a gqstn checkpoint: " + path);
  DetectorConfig cfg;
  cfg.backbone = backbone_from_meta(ck.meta.at("backbone"));
  cfg.literal_sigmoid = ck.meta.at("literal_sigmoid").get<bool>();
  model = GqstnDetector(cfg, 0);
  ModelParams params = model.all_params();
  // split model tensors from optimizer moments
  Checkpoint model_only;
  model_only.meta = ck.meta;
  for (auto& [name, t] : ck.params.named)
    if (name.rfind("adam.", 0) != 0) model_only.params.named.emplace_back(name, t);
  load_into(params, model_only);

  TrainState st;
  st.start_phase = ck.meta.at("phase_completed").get<int>() + 1;
  st.global_epoch = ck.meta.at("global_epoch").get<int>();
  st.best_val = ck.meta.at("best_val").get<double>();
  st.bad_evals = ck.meta.at("bad_evals").get<int>();
  st.stopped = ck.meta.at("stopped").get<bool>();
  auto& m1 = st.opt.moments1();
  auto& m2 = st.opt.moments2();
  for (auto& [name, t] : params.named) {
    m1.push_back(ck.params.at("adam.m." + name).data());
    m2.push_back(ck.params.at("adam.v." + name).data());
  }
  st.opt.set_step_count(ck.meta.at("opt_step").get<int64_t>());
  return st;
}

// Geometric-regression baseline: identical backbone family, L_loc only.
inline TrainResult train_directgrasp(DirectGraspModel& model,
                                     const std::vector<SceneRecord>& train,
                                     const std::vector<SceneRecord>& val,
                                     const DatasetStats& stats, const Schedule& schedule,
                                     uint64_t seed, const TrainOptions& opts = {}) {
  schedule.validate();
  TrainResult res;
  std::ofstream sink;
  std::ofstream* sinkp = nullptr;
  if (!opts.history_path.empty()) {
    sink.open(opts.history_path, std::ios::trunc);
    if (!sink) throw TensorError("train_directgrasp: cannot open " + opts.history_path);
    sinkp = &sink;
  }
  Adam opt(schedule.adam);
  int64_t step = 0;
  int global_epoch = 0;
  for (int p = 0; p < int(schedule.phases.size()); ++p) {
    const Phase& phase = schedule.phases[p];
    for (int e = 0; e < phase.epochs; ++e, ++global_epoch) {
      std::vector<size_t> order(train.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng orng(derive_seed(seed, 1000 + uint64_t(global_epoch)));
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(orng.uniform_int(0, int64_t(i) - 1))]);
      for (size_t b = 0; b < order.size(); b += size_t(schedule.batch)) {
        size_t hi = std::min(order.size(), b + size_t(schedule.batch));
        model.params().zero_grad();
        double sum_loc = 0;
        for (size_t i = b; i < hi; ++i) {
          const SceneRecord& rec = train[order[i]];
          const Annotation& ann = detail::pick_positive(
              rec, derive_seed(seed, 2000 + uint64_t(global_epoch)), uint64_t(order[i]));
          CascadeParams target = cascade_from_grasp(ann.grasp, rec.depth.meta, stats);
          DetectorOutput o = model.forward(depth_tensor(rec.depth), rec.depth.meta, stats);
          Tensor l_loc = loc_loss(o, target, stats);
          detail::check_finite(o, l_loc.item(), 0.0, p, step);
          sum_loc += l_loc.item();
          mul(l_loc, 1.0 / double(hi - b)).backward();
        }
        opt.step(model.params(), phase.lr);
        ++step;
        detail::emit(res, sinkp,
                     {{"type", "step"}, {"step", step}, {"phase", p}, {"xi", 1.0},
                      {"lr", phase.lr}, {"L_loc", sum_loc / double(hi - b)},
                      {"L_rob", 0.0}, {"L_tot", sum_loc / double(hi - b)}});
      }
    }
  }
  return res;
}

}  // namespace gqstn
