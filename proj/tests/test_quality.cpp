#include <gtest/gtest.h>

#include <cstdio>

#include "gqstn/grad_check.hpp"
#include "gqstn/quality.hpp"

using namespace gqstn;

namespace {

// Toy crop bank: positives have a sunken square (object under the gripper),
// negatives are flat table. Linearly separable by mean depth.
std::vector<CropExample> toy_examples(int n, uint64_t seed, const ImageMeta& meta) {
  Rng rng(seed);
  std::vector<CropExample> out;
  for (int i = 0; i < n; ++i) {
    bool label = (i % 2) == 0;
    CropExample ex;
    ex.label = label;
    ex.z_raw = rng.normal(0, 1);
    ex.crop.assign(size_t(kCropSize * kCropSize), meta.table_depth());
    if (label) {
      for (int64_t r = 8; r < 24; ++r)
        for (int64_t c = 8; c < 24; ++c)
          ex.crop[size_t(r * kCropSize + c)] -= rng.uniform(0.02, 0.05);
    }
    for (auto& v : ex.crop) v += rng.normal(0, 0.001);
    out.push_back(std::move(ex));
  }
  return out;
}

QualityConfig tiny_config() {
  QualityConfig cfg;
  cfg.backbone.channels = {4, 8};
  cfg.backbone.residual = false;
  cfg.epochs = 20;
  cfg.lr = 3e-3;
  return cfg;
}

}  // namespace

TEST(Classifier, LinearlySeparableToyCropsReachHighAccuracy) {
  ImageMeta meta;
  auto [model, rep] = train_classifier(toy_examples(600, 5, meta), tiny_config(), 9, meta);
  EXPECT_GE(rep.accuracy, 0.99);
}

TEST(Classifier, LabelShuffledTrainingIsChanceLevel) {
  ImageMeta meta;
  auto ex = toy_examples(1200, 6, meta);
  Rng rng(7);
  for (auto& e : ex) e.label = rng.uniform() < 0.5;  // labels independent of crops
  auto [model, rep] = train_classifier(std::move(ex), tiny_config(), 10, meta);
  EXPECT_NEAR(rep.accuracy, 0.5, 0.05);
}

TEST(Classifier, SingleClassTrainingThrows) {
  ImageMeta meta;
  auto ex = toy_examples(50, 8, meta);
  for (auto& e : ex) e.label = true;
  EXPECT_THROW(train_classifier(std::move(ex), tiny_config(), 11, meta), TensorError);
}

TEST(Classifier, DeterministicPerSeed) {
  ImageMeta meta;
  auto [m1, r1] = train_classifier(toy_examples(200, 12, meta), tiny_config(), 13, meta);
  auto [m2, r2] = train_classifier(toy_examples(200, 12, meta), tiny_config(), 13, meta);
  EXPECT_EQ(m1.net.params().checksum(), m2.net.params().checksum());
  EXPECT_EQ(r1.accuracy, r2.accuracy);
}

TEST(Classify, IdenticalInputsGiveIdenticalOutputs) {
  QualityModel m;
  m.net = Backbone(quality_backbone_config(), 3);
  Tensor crop = Tensor::full({kCropSize, kCropSize}, 0.68);
  double p1 = classify(m, crop, Tensor::scalar(0.2)).second;
  double p2 = classify(m, crop, Tensor::scalar(0.2)).second;
  EXPECT_EQ(p1, p2);
}

TEST(Classify, WrongCropSizeThrows) {
  QualityModel m;
  m.net = Backbone(quality_backbone_config(), 3);
  EXPECT_THROW(classify(m, Tensor::zeros({16, 16}), Tensor::scalar(0.0)), TensorError);
}

TEST(Classify, CropGradientPassesGradCheckWithFrozenParams) {
  QualityModel m;
  BackboneConfig cfg = quality_backbone_config();
  cfg.channels = {4, 8};
  cfg.residual = false;
  m.net = Backbone(cfg, 17);
  m.freeze();
  Rng rng(18);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> crop_v(size_t(kCropSize * kCropSize));
    for (auto& v : crop_v) v = 0.68 + rng.normal(0, 0.01);
    Tensor crop({kCropSize, kCropSize}, crop_v, true);
    Tensor z = Tensor::scalar(rng.normal(0, 1), true);
    auto fn = [&](const std::vector<Tensor>& in) {
      return classify(m, in[0], in[1]).first;
    };
    auto report = grad_check(fn, {crop, z}, 1e-6, 1e-4);
    EXPECT_TRUE(report.pass) << report.to_string();
  }
  // frozen params collected no gradient
  for (const auto& [name, t] : m.net.params().named)
    for (double g : t.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Classify, LogitIsLipschitzSaneUnderPixelPerturbation) {
  QualityModel m;
  m.net = Backbone(quality_backbone_config(), 19);
  std::vector<double> base(size_t(kCropSize * kCropSize), 0.68);
  double l0 = classify(m, Tensor({kCropSize, kCropSize}, base), Tensor::scalar(0.0))
                  .first.item();
  for (double eps : {1e-4, 1e-2, 1.0}) {
    auto v = base;
    v[100] += eps;
    double l = classify(m, Tensor({kCropSize, kCropSize}, v), Tensor::scalar(0.0))
                   .first.item();
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_LE(std::abs(l - l0), 100.0 * eps);  // O(eps) with a generous constant
  }
}

TEST(RobustLabel, ThresholdIsStrict) {
  QualityModel m;
  m.net = Backbone(quality_backbone_config(), 20);
  Tensor crop = Tensor::full({kCropSize, kCropSize}, 0.69);
  Tensor z = Tensor::scalar(0.1);
  double p = classify(m, crop, z).second;
  EXPECT_FALSE(robust_label(m, crop, z, p));                 // tie -> not robust
  EXPECT_TRUE(robust_label(m, crop, z, p - 1e-9));
  EXPECT_FALSE(robust_label(m, crop, z, p + 1e-9));
}

TEST(RobustLabel, ThresholdSweepIsMonotone) {
  ImageMeta meta;
  auto [model, rep] = train_classifier(toy_examples(300, 21, meta), tiny_config(), 22, meta);
  auto ex = toy_examples(100, 23, meta);
  int prev_pos = int(ex.size()) + 1;
  for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    int pos = 0;
    for (const auto& e : ex)
      if (robust_label(model, Tensor({kCropSize, kCropSize}, e.crop),
                       Tensor::scalar(e.z_raw), thr))
        ++pos;
    EXPECT_LE(pos, prev_pos);  // raising the threshold never adds positives
    prev_pos = pos;
  }
}

TEST(Checkpoint, QualityRoundTripPreservesOutputs) {
  ImageMeta meta;
  auto [model, rep] = train_classifier(toy_examples(100, 24, meta), tiny_config(), 25, meta);
  std::string path = testing::TempDir() + "/quality.gqtn";
  save_quality(path, model);
  QualityModel back = load_quality(path);
  EXPECT_EQ(back.net.params().checksum(), model.net.params().checksum());
  Tensor crop = Tensor::full({kCropSize, kCropSize}, 0.67);
  EXPECT_EQ(classify(back, crop, Tensor::scalar(0.3)).second,
            classify(model, crop, Tensor::scalar(0.3)).second);
  std::remove(path.c_str());
}
