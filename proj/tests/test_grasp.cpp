#include <gtest/gtest.h>

#include "gqstn/grasp.hpp"
#include "gqstn/rng.hpp"
#include "gqstn/scenegen.hpp"
#include "raster_iou.hpp"

using namespace gqstn;

namespace {

RectGrasp make_rect(double cx, double cy, double angle, double w) {
  RectGrasp r;
  r.cx = cx;
  r.cy = cy;
  r.angle = angle;
  r.width_px = w;
  r.height_px = w / 5.0;
  return r;
}

}  // namespace

TEST(RectMetric, IdentityIsPositiveWithUnitIoU) {
  auto g = make_rect(10, 10, 0.4, 20);
  auto res = rect_metric(g, {g});
  EXPECT_TRUE(res.positive);
  EXPECT_NEAR(res.best_iou, 1.0, 1e-12);
  EXPECT_NEAR(res.angle_diff, 0.0, 1e-12);
}

TEST(RectMetric, FortyFiveDegreesFailsAngleRule) {
  auto g = make_rect(10, 10, 0.0, 20);
  auto p = make_rect(10, 10, kPi / 4, 20);
  EXPECT_FALSE(rect_metric(p, {g}).positive);
}

TEST(RectMetric, HalfOffsetSquaresGiveOneThird) {
  // two unit squares offset by half a width: inter = 0.5, union = 1.5
  Polygon a = oriented_rect({0, 0}, 0, 1, 1);
  Polygon b = oriented_rect({0.5, 0}, 0, 1, 1);
  EXPECT_NEAR(polygon_iou(a, b), 1.0 / 3.0, 1e-12);
}

TEST(RectMetric, EmptyGroundTruthThrows) {
  EXPECT_THROW(rect_metric(make_rect(0, 0, 0, 1), {}), TensorError);
}

TEST(RectMetric, TwoFoldSymmetryExact) {
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    auto g = make_rect(rng.uniform(20, 70), rng.uniform(20, 70), rng.uniform(-1.5, 1.5),
                       rng.uniform(10, 30));
    auto p = make_rect(g.cx + rng.normal(0, 3), g.cy + rng.normal(0, 3),
                       rng.uniform(-1.5, 1.5), g.width_px);
    auto p_flip = p;
    p_flip.angle = p.angle + kPi;
    EXPECT_EQ(rect_metric(p, {g}).positive, rect_metric(p_flip, {g}).positive);
  }
}

TEST(RectMetric, ClippingMatchesRasterOracle) {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    auto a = make_rect(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-kPi, kPi),
                       rng.uniform(1, 4));
    auto b = make_rect(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-kPi, kPi),
                       rng.uniform(1, 4));
    double exact = polygon_iou(rect_polygon(a), rect_polygon(b));
    double raster = test::raster_iou(rect_polygon(a), rect_polygon(b), 512);
    EXPECT_NEAR(exact, raster, 0.01);
  }
}

TEST(RectMetric, InvariantUnderRigidTransform) {
  Rng rng(43);
  for (int i = 0; i < 50; ++i) {
    auto g = make_rect(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1.5, 1.5),
                       rng.uniform(1, 3));
    auto p = make_rect(g.cx + rng.normal(0, 0.7), g.cy + rng.normal(0, 0.7),
                       g.angle + rng.normal(0, 0.5), g.width_px * rng.uniform(0.7, 1.3));
    bool before = rect_metric(p, {g}).positive;
    // rigid transform: rotate both by phi about a point, then translate
    double phi = rng.uniform(-kPi, kPi);
    double tx = rng.uniform(-5, 5), ty = rng.uniform(-5, 5);
    auto xform = [&](const RectGrasp& r) {
      double c = std::cos(phi), s = std::sin(phi);
      return make_rect(c * r.cx - s * r.cy + tx, s * r.cx + c * r.cy + ty, r.angle + phi,
                       r.width_px);
    };
    EXPECT_EQ(rect_metric(xform(p), {xform(g)}).positive, before);
  }
}

TEST(Conversions, IdentityCascadeIsCenterGrasp) {
  ImageMeta meta;
  DatasetStats st;
  st.gamma = 0.3;
  st.z_mean = 0.02;
  st.z_std = 0.01;
  CascadeParams p;  // identity
  auto g = grasp_from_cascade(p, st, meta);
  EXPECT_NEAR(g.x, double(meta.width - 1) / 2.0, 1e-12);
  EXPECT_NEAR(g.y, double(meta.height - 1) / 2.0, 1e-12);
  EXPECT_NEAR(g.theta, 0.0, 1e-12);
  EXPECT_NEAR(g.w, opening_px_from_scale(1.0, meta) * meta.pixel_scale, 1e-12);
  EXPECT_NEAR(g.z, st.z_mean, 1e-12);
}

TEST(Conversions, PureTranslationOffsets) {
  ImageMeta meta;
  DatasetStats st;
  CascadeParams p;
  p.t = AffineParams::translation(0.1, 0.2);
  auto g = grasp_from_cascade(p, st, meta);
  // x param 0.1 -> normalized offset 0.2 -> 0.1*(W-1) pixels from center
  EXPECT_NEAR(g.x, double(meta.width - 1) / 2.0 + 0.1 * double(meta.width - 1), 1e-9);
  EXPECT_NEAR(g.y, double(meta.height - 1) / 2.0 + 0.2 * double(meta.height - 1), 1e-9);
}

TEST(Conversions, RoundTripIsIdentity) {
  ImageMeta meta;
  DatasetStats st;
  st.gamma = 0.35;
  st.z_mean = 0.015;
  st.z_std = 0.008;
  Rng rng(44);
  for (int i = 0; i < 200; ++i) {
    GraspConfig g;
    g.x = rng.uniform(10, 85);
    g.y = rng.uniform(10, 85);
    g.theta = rng.uniform(-kPi / 2 + 1e-3, kPi / 2);
    g.w = rng.uniform(0.01, 0.05);
    g.z = rng.uniform(0.0, 0.04);
    auto back = grasp_from_cascade(cascade_from_grasp(g, meta, st), st, meta);
    EXPECT_NEAR(back.x, g.x, 1e-6 * meta.width);
    EXPECT_NEAR(back.y, g.y, 1e-6 * meta.height);
    EXPECT_NEAR(back.theta, g.theta, 1e-9);
    EXPECT_NEAR(back.w, g.w, 1e-9);
    EXPECT_NEAR(back.z, g.z, 1e-9);
  }
}

TEST(Crop, CenterIdentityGraspIsCenterWindow) {
  ImageMeta meta;
  DatasetStats st;
  DepthImage im;
  im.meta = meta;
  im.depth.resize(size_t(meta.height * meta.width));
  Rng rng(45);
  for (auto& v : im.depth) v = rng.uniform(0.6, 0.7);
  // native scale: crop spans exactly 32 px of a (W-1)-px frame ->
  // s = 31/(W-1); theta = 0, centered
  GraspConfig g;
  g.x = double(meta.width - 1) / 2.0;
  g.y = double(meta.height - 1) / 2.0;
  g.theta = 0;
  double s = double(kCropSize - 1) / double(meta.width - 1);
  g.w = opening_px_from_scale(s, meta) * meta.pixel_scale;
  g.z = 0.01;
  auto crop = crop_for_classifier(im, g, st);
  int64_t off_y = (meta.height - kCropSize) / 2, off_x = (meta.width - kCropSize) / 2;
  for (int64_t i = 0; i < kCropSize; ++i)
    for (int64_t j = 0; j < kCropSize; ++j)
      EXPECT_NEAR(crop.data()[size_t(i * kCropSize + j)],
                  im.depth[size_t((i + off_y) * meta.width + j + off_x)], 1e-9);
}

TEST(Crop, RotatedBarAppearsHorizontal) {
  ImageMeta meta;
  DatasetStats st;
  // vertical bar through the image center
  PrimitiveShape shape;
  Primitive bar;
  bar.kind = Primitive::Kind::Box;
  bar.center = {0, 0};
  bar.angle = kPi / 2;  // long axis vertical
  bar.half_a = 0.040;
  bar.half_b = 0.006;
  bar.height = 0.03;
  shape.parts.push_back(bar);
  DepthImage im = render_scene(shape, meta, 1);

  GraspConfig g;  // grasp across the bar: gripper axis horizontal... the bar
  g.x = double(meta.width - 1) / 2.0;
  g.y = double(meta.height - 1) / 2.0;
  g.theta = GraspConfig::canonical_angle(kPi / 2);  // axis along the bar normal
  g.w = 0.03;
  g.z = 0.01;
  auto crop = crop_for_classifier(im, g, st);
  // in the aligned crop the bar must be horizontal: middle row mostly
  // object-depth, middle column mostly table-depth away from the center
  double table = meta.table_depth();
  int obj_row = 0, obj_col = 0;
  for (int64_t k = 4; k < kCropSize - 4; ++k) {
    if (crop.data()[size_t((kCropSize / 2) * kCropSize + k)] < table - 0.01) ++obj_row;
    if (std::abs(double(k) - kCropSize / 2.0) > 8 &&
        crop.data()[size_t(k * kCropSize + kCropSize / 2)] < table - 0.01)
      ++obj_col;
  }
  EXPECT_GT(obj_row, 20);
  EXPECT_EQ(obj_col, 0);
}

TEST(Crop, CenterOutsideImageThrows) {
  ImageMeta meta;
  DatasetStats st;
  DepthImage im;
  im.meta = meta;
  im.depth.assign(size_t(meta.height * meta.width), meta.table_depth());
  GraspConfig g;
  g.x = -5;
  g.y = 10;
  EXPECT_THROW(crop_for_classifier(im, g, st), TensorError);
}

// Train/eval parity: the crop equals the STN_scale output when the cascade
// parameters encode the grasp (the network path uses the fused sampler).
TEST(Crop, MatchesStnScaleOutput) {
  ImageMeta meta;
  DatasetStats st;
  st.gamma = 0.32;
  st.z_mean = 0.02;
  st.z_std = 0.01;
  Rng rng(46);
  OracleConfig ocfg;
  for (int rep = 0; rep < 20; ++rep) {
    Rng srng(derive_seed(99, uint64_t(rep)));
    PrimitiveShape shape = random_shape(srng, ocfg, meta);
    DepthImage im = render_scene(shape, meta, derive_seed(98, uint64_t(rep)));
    GraspConfig g;
    g.x = rng.uniform(20, 75);
    g.y = rng.uniform(20, 75);
    g.theta = rng.uniform(-kPi / 2 + 1e-3, kPi / 2);
    g.w = rng.uniform(0.01, 0.05);
    g.z = rng.uniform(0, 0.04);
    auto crop = crop_for_classifier(im, g, st);

    // network path: fused affine_sample stages with matrices built from the
    // encoded cascade parameters
    CascadeParams p = cascade_from_grasp(g, meta, st);
    double bg = meta.table_depth();
    Tensor img = depth_tensor(im);
    Tensor x = Tensor::scalar(p.t.raw[0]), y = Tensor::scalar(p.t.raw[1]);
    Tensor theta = Tensor::scalar(p.r.raw[0]);
    Tensor s = Tensor::scalar(p.c.raw[0]);
    Tensor o1 = affine_sample(img, translation_matrix(x, y), meta.height, meta.width, bg);
    Tensor o2 = affine_sample(o1, rotation_matrix(theta), meta.height, meta.width, bg);
    Tensor o3 = affine_sample(o2, scale_matrix(s), kCropSize, kCropSize, bg);
    double max_diff = 0;
    for (size_t k = 0; k < crop.data().size(); ++k)
      max_diff = std::max(max_diff, std::abs(crop.data()[k] - o3.data()[k]));
    EXPECT_LT(max_diff, 1e-6);
  }
}
