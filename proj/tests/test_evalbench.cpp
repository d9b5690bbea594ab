#include <gtest/gtest.h>

#include "gqstn/evalbench.hpp"

using namespace gqstn;

namespace {

QualityModel constant_quality(double head_bias) {
  QualityModel m;
  BackboneConfig cfg = quality_backbone_config();
  cfg.channels = {4, 8};
  cfg.residual = false;
  m.net = Backbone(cfg, 1);
  for (auto& [name, t] : m.net.params().named)
    for (auto& v : t.data()) v = 0.0;
  m.net.params().at("head.b").data()[0] = head_bias;
  m.freeze();
  return m;
}

std::vector<SceneRecord> small_scenes(int n, uint64_t seed) {
  DatasetSpec spec;
  std::vector<SceneRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(make_scene(spec, seed, uint64_t(i)));
  return out;
}

}  // namespace

TEST(EvalDetector, PerfectOracleStubScoresFullMarks) {
  auto scenes = small_scenes(6, 90);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_quality(3.0);  // always robust
  // stub: return the first positive annotation of the scene it is given
  size_t cursor = 0;
  DetectorFn stub = [&](const DepthImage& im) {
    const SceneRecord& rec = scenes[cursor++];
    for (const auto& a : rec.annotations)
      if (a.robust)
        return Detection{a.grasp, Tensor(), (a.grasp.z - st.z_mean) / st.z_std};
    throw TensorError("stub: no positive");
  };
  EvalReport rep = eval_detector(stub, scenes, st, q);
  EXPECT_EQ(rep.rect_precision, 100.0);
  EXPECT_EQ(rep.robust_precision, 100.0);
  EXPECT_EQ(rep.rect_pos_robust_pos, 100.0);
}

TEST(EvalDetector, QuadPartitionSumsToHundred) {
  auto scenes = small_scenes(8, 91);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_quality(0.4);  // p ~ 0.6, constant
  Rng rng(92);
  DetectorFn noisy = [&](const DepthImage& im) {
    GraspConfig g;
    g.x = rng.uniform(10, 85);
    g.y = rng.uniform(10, 85);
    g.theta = rng.uniform(-1.5, 1.5);
    g.w = rng.uniform(0.01, 0.05);
    g.z = 0.01;
    return Detection{g, Tensor(), 0.0};
  };
  EvalReport rep = eval_detector(noisy, scenes, st, q);
  double sum = rep.rect_pos_robust_neg + rep.rect_pos_robust_pos +
               rep.rect_neg_robust_pos + rep.rect_neg_robust_neg;
  EXPECT_NEAR(sum, 100.0, 1e-9);
}

TEST(Baseline, KOneReturnsItsSingleCandidate) {
  auto scenes = small_scenes(1, 93);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_quality(1.0);
  BaselineConfig cfg;
  cfg.k = 1;
  BaselineResult r = prop_classify_baseline(scenes[0].depth, q, st, cfg, 94);
  EXPECT_GT(r.grasp.w, 0.0);
  EXPECT_GT(r.p_robust, 0.5);
}

TEST(Baseline, DeterministicPerSeed) {
  auto scenes = small_scenes(1, 95);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_quality(1.0);
  BaselineConfig cfg;
  cfg.k = 50;
  BaselineResult a = prop_classify_baseline(scenes[0].depth, q, st, cfg, 96);
  BaselineResult b = prop_classify_baseline(scenes[0].depth, q, st, cfg, 96);
  EXPECT_EQ(a.grasp.x, b.grasp.x);
  EXPECT_EQ(a.grasp.theta, b.grasp.theta);
  EXPECT_EQ(a.p_robust, b.p_robust);
}

TEST(Baseline, ArgmaxInvariantUnderDuplicatedCandidates) {
  auto scenes = small_scenes(1, 97);
  DatasetStats st = compute_stats(scenes);
  QualityModel q = constant_quality(1.0);
  Rng rng(98);
  std::vector<GraspConfig> cands;
  for (int i = 0; i < 10; ++i) {
    GraspConfig g;
    g.x = rng.uniform(20, 75);
    g.y = rng.uniform(20, 75);
    g.theta = rng.uniform(-1.5, 1.5);
    g.w = rng.uniform(0.01, 0.05);
    g.z = 0.01;
    cands.push_back(g);
  }
  // constant classifier gives ties everywhere: argmax must stay the first
  size_t best = rank_candidates(scenes[0].depth, q, st, cands);
  auto doubled = cands;
  doubled.insert(doubled.end(), cands.begin(), cands.end());
  EXPECT_EQ(rank_candidates(scenes[0].depth, q, st, doubled), best);
}

TEST(Baseline, EmptySceneHasNoCandidates) {
  ImageMeta meta;
  PrimitiveShape empty;
  DepthImage im = render_scene(empty, meta, 99);
  DatasetStats st;
  QualityModel q = constant_quality(1.0);
  BaselineConfig cfg;
  EXPECT_THROW(prop_classify_baseline(im, q, st, cfg, 100), TensorError);
}

TEST(Timing, MedianStableWhenRepsDouble) {
  volatile double sink = 0;
  auto fn = [&] {
    double s = 0;
    for (int i = 1; i < 40000; ++i) s += 1.0 / double(i);
    sink = s;
  };
  TimingStats a = timing_bench(fn, 3, 20);
  TimingStats b = timing_bench(fn, 3, 40);
  EXPECT_LT(std::abs(a.median_sec - b.median_sec), 0.2 * std::max(a.median_sec, b.median_sec) + 1e-4);
}

TEST(Timing, RejectsTooFewReps) {
  EXPECT_THROW(timing_bench([] {}, 0, 5), TensorError);
}

TEST(Timing, LinearFitRecoversExactLine) {
  EXPECT_NEAR(linear_fit_r2({100, 300, 1000}, {1.0, 3.0, 10.0}), 1.0, 1e-12);
  EXPECT_LT(linear_fit_r2({1, 2, 3, 4}, {1.0, -1.0, 1.0, -1.0}), 0.5);
}
