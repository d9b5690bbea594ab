#include <gtest/gtest.h>

#include "gqstn/evalbench.hpp"
#include "gqstn/training.hpp"

using namespace gqstn;

namespace {

DetectorConfig tiny_detector_config() {
  DetectorConfig cfg;
  cfg.backbone.channels = {4, 8};
  cfg.backbone.residual = false;
  return cfg;
}

// A quality model that always says robust: zero convs, positive head bias.
QualityModel constant_yes_quality() {
  QualityModel m;
  BackboneConfig cfg = quality_backbone_config();
  cfg.channels = {4, 8};
  cfg.residual = false;
  m.net = Backbone(cfg, 1);
  for (auto& [name, t] : m.net.params().named)
    for (auto& v : t.data()) v = 0.0;
  m.net.params().at("head.b").data()[0] = 2.0;
  m.freeze();
  return m;
}

std::vector<SceneRecord> tiny_scenes(int n, uint64_t seed) {
  DatasetSpec spec;
  spec.n_pos_min = spec.n_pos_max = 3;
  spec.n_neg_min = spec.n_neg_max = 1;
  std::vector<SceneRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(make_scene(spec, seed, uint64_t(i)));
  return out;
}

// One positive per scene: the per-epoch positive pick is then a fixed target,
// which is what an overfitting test needs.
std::vector<SceneRecord> one_positive_scenes(int n, uint64_t seed) {
  DatasetSpec spec;
  spec.n_pos_min = spec.n_pos_max = 1;
  spec.n_neg_min = spec.n_neg_max = 0;
  std::vector<SceneRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(make_scene(spec, seed, uint64_t(i)));
  return out;
}

CascadeParams sample_target(uint64_t seed) {
  ImageMeta meta;
  DatasetStats st;
  st.gamma = 0.3;
  Rng rng(seed);
  GraspConfig g;
  g.x = rng.uniform(20, 75);
  g.y = rng.uniform(20, 75);
  g.theta = rng.uniform(-1.5, 1.5);
  g.w = rng.uniform(0.01, 0.05);
  g.z = rng.uniform(0, 0.04);
  return cascade_from_grasp(g, meta, st);
}

}  // namespace

TEST(LocLoss, ZeroWhenPredictionEqualsEncodedTarget) {
  DatasetStats st;
  st.gamma = 0.3;
  CascadeParams t = sample_target(31);
  DetectorOutput o;
  o.x = Tensor::scalar(t.t.raw[0]);
  o.y = Tensor::scalar(t.t.raw[1]);
  o.alpha = Tensor::scalar(std::sin(2 * t.r.raw[0]));
  o.beta = Tensor::scalar(std::cos(2 * t.r.raw[0]));
  o.ws = Tensor::scalar(std::log(t.c.raw[0] / st.gamma));
  o.wz = Tensor::scalar(t.z_raw);
  EXPECT_NEAR(loc_loss(o, t, st).item(), 0.0, 1e-12);
}

TEST(LocLoss, OnlyXOffByDeltaGivesDeltaSquared) {
  DatasetStats st;
  st.gamma = 0.3;
  CascadeParams t = sample_target(32);
  DetectorOutput o;
  o.x = Tensor::scalar(t.t.raw[0] + 0.03);
  o.y = Tensor::scalar(t.t.raw[1]);
  o.alpha = Tensor::scalar(std::sin(2 * t.r.raw[0]));
  o.beta = Tensor::scalar(std::cos(2 * t.r.raw[0]));
  o.ws = Tensor::scalar(std::log(t.c.raw[0] / st.gamma));
  o.wz = Tensor::scalar(t.z_raw);
  EXPECT_NEAR(loc_loss(o, t, st).item(), 0.03 * 0.03, 1e-12);
}

TEST(LocLoss, ThetaAndThetaPlusPiEncodeIdenticalTargets) {
  DatasetStats st;
  st.gamma = 0.3;
  ImageMeta meta;
  GraspConfig g;
  g.x = 40;
  g.y = 50;
  g.theta = 0.7;
  g.w = 0.03;
  g.z = 0.01;
  GraspConfig g2 = g;
  g2.theta = GraspConfig::canonical_angle(g.theta + kPi);
  CascadeParams t1 = cascade_from_grasp(g, meta, st);
  CascadeParams t2 = cascade_from_grasp(g2, meta, st);
  DetectorOutput o;
  o.x = Tensor::scalar(0.1);
  o.y = Tensor::scalar(-0.1);
  o.alpha = Tensor::scalar(0.3);
  o.beta = Tensor::scalar(0.4);
  o.ws = Tensor::scalar(0.2);
  o.wz = Tensor::scalar(0.0);
  EXPECT_NEAR(loc_loss(o, t1, st).item(), loc_loss(o, t2, st).item(), 1e-9);
}

TEST(RobLoss, HalfProbabilityGivesLnTwo) {
  QualityModel m = constant_yes_quality();
  m.net.params().at("head.b").data()[0] = 0.0;  // logit 0 -> p 0.5
  Tensor crop = Tensor::full({kCropSize, kCropSize}, 0.70);
  EXPECT_NEAR(rob_loss(m, crop, Tensor::scalar(0.0)).item(), std::log(2.0), 1e-12);
}

TEST(RobLoss, GradientReachesConstrainedParamsOnMisalignedCrop) {
  ImageMeta meta;
  DatasetStats st;
  st.gamma = 0.3;
  auto scenes = tiny_scenes(1, 40);
  QualityModel q = constant_yes_quality();
  // real weights so the logit actually depends on the crop
  Rng rng(41);
  for (auto& [name, t] : q.net.params().named)
    for (auto& v : t.data()) v = rng.normal(0, 0.2);
  Tensor img = depth_tensor(scenes[0].depth);
  // start from a positive annotation so the crop covers the object; a crop on
  // flat background has exactly zero spatial gradient under bilinear sampling
  const Annotation* pos = nullptr;
  for (const auto& a : scenes[0].annotations)
    if (a.robust) { pos = &a; break; }
  ASSERT_NE(pos, nullptr);
  CascadeParams cp = cascade_from_grasp(pos->grasp, meta, st);
  Tensor x = Tensor::scalar(cp.t.raw[0] + 0.02, true), y = Tensor::scalar(cp.t.raw[1] - 0.01, true);
  Tensor theta = Tensor::scalar(cp.r.raw[0] + 0.1, true), s = Tensor::scalar(cp.c.raw[0], true);
  double bg = meta.table_depth();
  Tensor o1 = affine_sample(img, translation_matrix(x, y), meta.height, meta.width, bg);
  Tensor o2 = affine_sample(o1, rotation_matrix(theta), meta.height, meta.width, bg);
  Tensor crop = affine_sample(o2, scale_matrix(s), kCropSize, kCropSize, bg);
  Tensor loss = rob_loss(q, crop, Tensor::scalar(0.2));
  loss.backward();
  EXPECT_NE(x.grad()[0], 0.0);
  EXPECT_NE(y.grad()[0], 0.0);
  EXPECT_NE(theta.grad()[0], 0.0);
  EXPECT_NE(s.grad()[0], 0.0);
}

TEST(Schedule, PaperDefaultShape) {
  Schedule s = Schedule::paper_default();
  ASSERT_EQ(s.phases.size(), 5u);
  EXPECT_EQ(s.phases[0].epochs, 6);
  EXPECT_EQ(s.phases[0].xi, 1.0);
  EXPECT_EQ(s.phases[0].lr, 1e-3);
  EXPECT_EQ(s.phases[1].epochs, 3);
  EXPECT_EQ(s.phases[1].xi, 0.5);
  EXPECT_EQ(s.phases[1].lr, 2e-4);
  EXPECT_EQ(s.phases[2].epochs, 3);
  EXPECT_EQ(s.phases[2].xi, 0.2);
  EXPECT_EQ(s.phases[2].lr, 4e-5);
  EXPECT_EQ(s.phases[3].epochs, 9);
  EXPECT_EQ(s.phases[3].xi, 0.0);
  EXPECT_EQ(s.phases[3].lr, 4e-5);
  EXPECT_EQ(s.phases[4].lr, 8e-6);
  // teacher forcing exactly while xi > 0
  for (const auto& p : s.phases) EXPECT_EQ(p.teacher_forcing, p.xi > 0.0);
  s.validate();
}

TEST(Schedule, ValidationRejectsBadShapes) {
  Schedule s;
  s.phases = {{2, 0.5, 1e-3, true}, {2, 1.0, 1e-3, true}};  // xi increases
  EXPECT_THROW(s.validate(), TensorError);
  s.phases = {{2, 0.0, 1e-3, true}};  // tf with xi == 0
  EXPECT_THROW(s.validate(), TensorError);
}

TEST(TrainGqstn, ZeroEpochScheduleLeavesModelUntouched) {
  auto scenes = tiny_scenes(2, 50);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 51);
  uint64_t before = model.all_params().checksum();
  Schedule s;
  s.phases = {{0, 1.0, 1e-3, true}};
  QualityModel q = constant_yes_quality();
  auto res = train_gqstn(model, scenes, {}, st, q, s, 52);
  EXPECT_EQ(model.all_params().checksum(), before);
  EXPECT_TRUE(res.history.empty());
}

TEST(TrainGqstn, RequiresFrozenQuality) {
  auto scenes = tiny_scenes(1, 53);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 54);
  QualityModel q = constant_yes_quality();
  q.frozen = false;
  Schedule s;
  s.phases = {{1, 1.0, 1e-3, true}};
  EXPECT_THROW(train_gqstn(model, scenes, {}, st, q, s, 55), TensorError);
}

TEST(TrainGqstn, LossMixIdentityHoldsAtEveryStep) {
  auto scenes = tiny_scenes(4, 56);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 57);
  QualityModel q = constant_yes_quality();
  Schedule s;
  s.phases = {{1, 0.5, 1e-3, true}, {1, 0.2, 1e-4, true}};
  s.batch = 2;
  auto res = train_gqstn(model, scenes, {}, st, q, s, 58);
  int steps = 0;
  for (const auto& line : res.history) {
    auto j = nlohmann::json::parse(line);
    if (j["type"] != "step") continue;
    ++steps;
    double xi = j["xi"];
    EXPECT_NEAR(double(j["L_tot"]),
                xi * double(j["L_loc"]) + (1 - xi) * double(j["L_rob"]), 1e-9);
  }
  EXPECT_EQ(steps, 4);
}

TEST(TrainGqstn, OverfitTenScenesDrivesLocLossDown) {
  auto scenes = one_positive_scenes(10, 60);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 61);
  QualityModel q = constant_yes_quality();
  Schedule s;
  // teacher forcing, as in the bootstrap phase: downstream heads train on
  // ground-truth-aligned inputs instead of chasing early mispredictions
  s.phases = {{150, 1.0, 1e-3, true}};
  s.batch = 10;
  auto res = train_gqstn(model, scenes, {}, st, q, s, 62);
  double first = -1, last = -1;
  for (const auto& line : res.history) {
    auto j = nlohmann::json::parse(line);
    if (j["type"] != "step") continue;
    if (first < 0) first = j["L_loc"];
    last = j["L_loc"];
  }
  EXPECT_LT(last, 0.05 * first) << "first " << first << " last " << last;
}

TEST(TrainGqstn, TeacherForcingDecouplesDownstreamFromUpstreamParams) {
  auto scenes = tiny_scenes(1, 63);
  DatasetStats st = compute_stats(scenes);
  ImageMeta meta = scenes[0].depth.meta;
  GqstnDetector model(tiny_detector_config(), 64);
  const Annotation* pos = nullptr;
  for (const auto& a : scenes[0].annotations)
    if (a.robust) pos = &a;
  ASSERT_NE(pos, nullptr);
  CascadeParams target = cascade_from_grasp(pos->grasp, meta, st);
  Tensor img = depth_tensor(scenes[0].depth);

  DetectorOutput before = model.forward(img, meta, st, &target);
  DetectorOutput before_free = model.forward(img, meta, st);
  // perturb the translation backbone only
  for (auto& [name, t] : model.loc_t().params().named)
    for (auto& v : t.data()) v += 0.05;
  DetectorOutput after = model.forward(img, meta, st, &target);
  DetectorOutput after_free = model.forward(img, meta, st);

  // with teacher forcing the crop and downstream heads are bitwise unchanged
  EXPECT_EQ(before.crop.data(), after.crop.data());
  EXPECT_EQ(before.theta.item(), after.theta.item());
  EXPECT_EQ(before.wz.item(), after.wz.item());
  EXPECT_NE(before.wx.item(), after.wx.item());  // the head itself did move
  // without teacher forcing the perturbation propagates
  EXPECT_NE(before_free.crop.data(), after_free.crop.data());
}

TEST(TrainGqstn, QualityChecksumUnchangedByTraining) {
  auto scenes = tiny_scenes(3, 65);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 66);
  QualityModel q = constant_yes_quality();
  uint64_t before = q.net.params().checksum();
  Schedule s;
  s.phases = {{1, 0.5, 1e-3, true}, {1, 0.0, 1e-4, false}};
  train_gqstn(model, scenes, scenes, st, q, s, 67);
  EXPECT_EQ(q.net.params().checksum(), before);
}

TEST(TrainGqstn, NanAbortNamesPhaseStepAndTensor) {
  auto scenes = tiny_scenes(2, 68);
  DatasetStats st = compute_stats(scenes);
  GqstnDetector model(tiny_detector_config(), 69);
  model.loc_t().params().at("head.w").data()[0] = std::nan("");
  QualityModel q = constant_yes_quality();
  Schedule s;
  s.phases = {{1, 1.0, 1e-3, false}};
  try {
    train_gqstn(model, scenes, {}, st, q, s, 70);
    FAIL() << "expected NaN abort";
  } catch (const TensorError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("phase 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("trans.w_x"), std::string::npos) << msg;
  }
}

TEST(TrainGqstn, ResumeFromPhaseCheckpointMatchesUninterruptedRun) {
  auto scenes = tiny_scenes(4, 71);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_yes_quality();
  Schedule s;
  s.phases = {{2, 1.0, 1e-3, true}, {2, 0.5, 2e-4, true}, {2, 0.0, 1e-4, false}};
  s.batch = 2;
  std::string dir = testing::TempDir() + "/resume_ck";
  std::filesystem::create_directories(dir);

  GqstnDetector full(tiny_detector_config(), 72);
  TrainOptions opts;
  opts.checkpoint_dir = dir;
  auto full_res = train_gqstn(full, scenes, scenes, st, q, s, 73, opts);

  GqstnDetector resumed;
  TrainState state = resume_gqstn(dir + "/phase0.gqtn", resumed);
  auto resumed_res = train_gqstn(resumed, scenes, scenes, st, q, s, 73, {}, &state);

  EXPECT_EQ(resumed.all_params().checksum(), full.all_params().checksum());
  EXPECT_NEAR(resumed_res.final_val_robust, full_res.final_val_robust, 1e-9);
  std::filesystem::remove_all(dir);
}

TEST(TrainDirectGrasp, DeterministicPerSeedAndOverfits) {
  auto scenes = one_positive_scenes(10, 74);
  DatasetStats st = compute_stats(scenes);
  Schedule s;
  s.phases = {{120, 1.0, 1e-3, false}};
  s.batch = 10;
  DirectGraspModel m1(tiny_detector_config(), 75);
  DirectGraspModel m2(tiny_detector_config(), 75);
  auto r1 = train_directgrasp(m1, scenes, {}, st, s, 76);
  auto r2 = train_directgrasp(m2, scenes, {}, st, s, 76);
  EXPECT_EQ(r1.history, r2.history);
  EXPECT_EQ(m1.params().checksum(), m2.params().checksum());
  double first = -1, last = -1;
  for (const auto& line : r1.history) {
    auto j = nlohmann::json::parse(line);
    if (first < 0) first = j["L_loc"];
    last = j["L_loc"];
  }
  EXPECT_LT(last, 0.05 * first) << "first " << first << " last " << last;
}
