#pragma once

#include <fstream>

#include "gqstn/detector.hpp"
#include "gqstn/evalbench.hpp"
#include "gqstn/quality.hpp"
#include "gqstn/scenegen.hpp"
#include "gqstn/training.hpp"

namespace gqstn {

// One JSON document drives every command. All defaults are spelled out in
// default_json(), unknown keys are rejected against that structure, and the
// resolved document is echoed into every artifact for provenance.

struct RunConfig {
  DatasetSpec dataset;        // carries ImageMeta + OracleConfig
  DetectorConfig detector;    // shared by GQ-STN and DirectGrasp
  QualityConfig quality;
  Schedule schedule;
  BaselineConfig baseline;
  int bench_warmup = 3;
  int bench_reps = 30;
  uint64_t seed_dataset = 1, seed_quality = 2, seed_detector = 3;
  uint64_t seed_baseline = 4, seed_eval = 5;
  nlohmann::json echo;        // fully-resolved document

  static nlohmann::json default_json() {
    DatasetSpec d;
    QualityConfig q;
    Schedule s = Schedule::paper_default();
    BaselineConfig b;
    nlohmann::json j;
    j["dataset"] = {{"n_scenes", d.n_scenes},
                    {"height", d.meta.height},
                    {"width", d.meta.width},
                    {"pixel_scale", d.meta.pixel_scale},
                    {"camera_height", d.meta.camera_height},
                    {"n_pos_min", d.n_pos_min},
                    {"n_pos_max", d.n_pos_max},
                    {"n_neg_min", d.n_neg_min},
                    {"n_neg_max", d.n_neg_max},
                    {"noise_sigma", d.noise_sigma},
                    {"train_frac", d.train_frac},
                    {"val_frac", d.val_frac}};
    j["oracle"] = {{"friction_coeff", d.oracle.friction_coeff},
                   {"max_opening", d.oracle.max_opening},
                   {"clearance_depth", d.oracle.clearance_depth},
                   {"contact_tol", d.oracle.contact_tol}};
    j["backbone"] = {{"channels", std::vector<int64_t>{8, 16, 32, 64}},
                     {"residual", true},
                     {"flatten_head", true},
                     {"literal_sigmoid", false}};
    j["quality"] = {{"channels", q.backbone.channels},
                    {"residual", q.backbone.residual},
                    {"epochs", q.epochs},
                    {"lr", q.lr},
                    {"batch", q.batch},
                    {"val_frac", q.val_frac},
                    {"threshold", q.threshold}};
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : s.phases)
      phases.push_back({{"epochs", p.epochs}, {"xi", p.xi}, {"lr", p.lr},
                        {"teacher_forcing", p.teacher_forcing}});
    j["schedule"] = {{"epoch_multiplier", 1.0},
                     {"no_bootstrap", false},
                     {"phases", phases},
                     {"batch", s.batch},
                     {"early_stop_patience", s.early_stop_patience},
                     {"adam", {{"beta1", s.adam.beta1}, {"beta2", s.adam.beta2},
                               {"eps", s.adam.eps}, {"l2_reg", s.adam.l2_reg}}}};
    j["eval"] = {{"baseline_k", b.k},
                 {"grad_threshold", b.grad_threshold},
                 {"perp_tol_deg", b.perp_tol * 180.0 / kPi},
                 {"max_opening", b.max_opening},
                 {"z_fraction", b.z_fraction},
                 {"bench_warmup", 3},
                 {"bench_reps", 30}};
    j["seeds"] = {{"dataset", 1}, {"quality", 2}, {"detector", 3},
                  {"baseline", 4}, {"eval", 5}};
    return j;
  }

  // Recursive overlay of user keys onto defaults; any key absent from the
  // default structure is a config error.
  static void merge_checked(nlohmann::json& base, const nlohmann::json& user,
                            const std::string& path) {
    if (!user.is_object())
      throw TensorError("config: expected object at '" + (path.empty() ? "." : path) + "'");
    for (auto it = user.begin(); it != user.end(); ++it) {
      std::string here = path.empty() ? it.key() : path + "." + it.key();
      if (!base.contains(it.key()))
        throw TensorError("config: unknown key '" + here + "'");
      nlohmann::json& slot = base[it.key()];
      if (slot.is_object()) {
        merge_checked(slot, it.value(), here);
      } else if (slot.is_array() && !slot.empty() && slot[0].is_object()) {
        // array of structured entries (schedule phases): check each item
        if (!it.value().is_array())
          throw TensorError("config: expected array at '" + here + "'");
        nlohmann::json out = nlohmann::json::array();
        for (const auto& item : it.value()) {
          nlohmann::json tmpl = slot[0];
          merge_checked(tmpl, item, here + "[]");
          out.push_back(std::move(tmpl));
        }
        slot = std::move(out);
      } else {
        slot = it.value();
      }
    }
  }

  static RunConfig from_json(const nlohmann::json& user) {
    nlohmann::json j = default_json();
    merge_checked(j, user, "");
    RunConfig c;
    const auto& d = j["dataset"];
    c.dataset.n_scenes = d["n_scenes"].get<int>();
    c.dataset.meta.height = d["height"].get<int64_t>();
    c.dataset.meta.width = d["width"].get<int64_t>();
    c.dataset.meta.pixel_scale = d["pixel_scale"].get<double>();
    c.dataset.meta.camera_height = d["camera_height"].get<double>();
    c.dataset.n_pos_min = d["n_pos_min"].get<int>();
    c.dataset.n_pos_max = d["n_pos_max"].get<int>();
    c.dataset.n_neg_min = d["n_neg_min"].get<int>();
    c.dataset.n_neg_max = d["n_neg_max"].get<int>();
    c.dataset.noise_sigma = d["noise_sigma"].get<double>();
    c.dataset.train_frac = d["train_frac"].get<double>();
    c.dataset.val_frac = d["val_frac"].get<double>();
    const auto& o = j["oracle"];
    c.dataset.oracle.friction_coeff = o["friction_coeff"].get<double>();
    c.dataset.oracle.max_opening = o["max_opening"].get<double>();
    c.dataset.oracle.clearance_depth = o["clearance_depth"].get<double>();
    c.dataset.oracle.contact_tol = o["contact_tol"].get<double>();
    const auto& bb = j["backbone"];
    c.detector.backbone.input_h = c.dataset.meta.height;
    c.detector.backbone.input_w = c.dataset.meta.width;
    c.detector.backbone.channels = bb["channels"].get<std::vector<int64_t>>();
    c.detector.backbone.residual = bb["residual"].get<bool>();
    c.detector.backbone.flatten_head = bb["flatten_head"].get<bool>();
    c.detector.literal_sigmoid = bb["literal_sigmoid"].get<bool>();
    const auto& q = j["quality"];
    c.quality.backbone.channels = q["channels"].get<std::vector<int64_t>>();
    c.quality.backbone.residual = q["residual"].get<bool>();
    c.quality.epochs = q["epochs"].get<int>();
    c.quality.lr = q["lr"].get<double>();
    c.quality.batch = q["batch"].get<int>();
    c.quality.val_frac = q["val_frac"].get<double>();
    c.quality.threshold = q["threshold"].get<double>();
    const auto& sj = j["schedule"];
    double mult = sj["epoch_multiplier"].get<double>();
    bool user_phases = user.contains("schedule") && user["schedule"].contains("phases");
    if (user_phases) {
      c.schedule.phases.clear();
      for (const auto& pj : sj["phases"])
        c.schedule.phases.push_back({pj["epochs"].get<int>(), pj["xi"].get<double>(),
                                     pj["lr"].get<double>(), pj["teacher_forcing"].get<bool>()});
    } else {
      c.schedule = sj["no_bootstrap"].get<bool>() ? Schedule::no_bootstrap(mult)
                                                  : Schedule::paper_default(mult);
    }
    c.schedule.batch = sj["batch"].get<int>();
    c.schedule.early_stop_patience = sj["early_stop_patience"].get<int>();
    c.schedule.adam.beta1 = sj["adam"]["beta1"].get<double>();
    c.schedule.adam.beta2 = sj["adam"]["beta2"].get<double>();
    c.schedule.adam.eps = sj["adam"]["eps"].get<double>();
    c.schedule.adam.l2_reg = sj["adam"]["l2_reg"].get<double>();
    c.schedule.validate();
    const auto& e = j["eval"];
    c.baseline.k = e["baseline_k"].get<int>();
    c.baseline.grad_threshold = e["grad_threshold"].get<double>();
    c.baseline.perp_tol = e["perp_tol_deg"].get<double>() * kPi / 180.0;
    c.baseline.max_opening = e["max_opening"].get<double>();
    c.baseline.z_fraction = e["z_fraction"].get<double>();
    c.bench_warmup = e["bench_warmup"].get<int>();
    c.bench_reps = e["bench_reps"].get<int>();
    const auto& sd = j["seeds"];
    c.seed_dataset = sd["dataset"].get<uint64_t>();
    c.seed_quality = sd["quality"].get<uint64_t>();
    c.seed_detector = sd["detector"].get<uint64_t>();
    c.seed_baseline = sd["baseline"].get<uint64_t>();
    c.seed_eval = sd["eval"].get<uint64_t>();
    // echo the document as resolved (including regenerated phases)
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : c.schedule.phases)
      phases.push_back({{"epochs", p.epochs}, {"xi", p.xi}, {"lr", p.lr},
                        {"teacher_forcing", p.teacher_forcing}});
    j["schedule"]["phases"] = std::move(phases);
    c.echo = std::move(j);
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw TensorError("config: cannot open " + path);
    nlohmann::json user;
    try {
      is >> user;
    } catch (const nlohmann::json::exception& e) {
      throw TensorError("config: invalid JSON in " + path + ": " + e.what());
    }
    return from_json(user);
  }
};

}  // namespace gqstn
