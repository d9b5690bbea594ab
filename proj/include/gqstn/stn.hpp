#pragma once

#include <array>
#include <cmath>

#include "gqstn/tensor.hpp"

namespace gqstn {

inline constexpr double kPi = 3.14159265358979323846;

enum class AffineKind { Translation, Rotation, Scale };

// Constrained 2x3 affine transform. `matrix` stores the literal constrained
// form; grid generation maps the translation column into normalized-space
// offsets (factor 2, so x = +-0.5 reaches the image borders).
struct AffineParams {
  AffineKind kind;
  std::array<double, 6> matrix;  // row-major [m00 m01 m02; m10 m11 m12]
  std::array<double, 2> raw;     // (x,y) | (theta,_) | (s,_)

  static AffineParams translation(double x, double y) {
    return {AffineKind::Translation, {1, 0, x, 0, 1, y}, {x, y}};
  }
  static AffineParams rotation(double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    return {AffineKind::Rotation, {c, -s, 0, s, c, 0}, {theta, 0}};
  }
  static AffineParams scale(double s) {
    return {AffineKind::Scale, {s, 0, 0, 0, s, 0}, {s, 0}};
  }

  // Matrix acting on normalized [-1,1]^2 coordinates (translation doubled).
  std::array<double, 6> normalized() const {
    auto m = matrix;
    if (kind == AffineKind::Translation) {
      m[2] *= 2.0;
      m[5] *= 2.0;
    }
    return m;
  }
};

// Dataset-derived normalization constants for the scale/z head.
struct DatasetStats {
  double gamma = 0.3;   // mean scale factor of positive training grasps
  double z_mean = 0.0;  // gripper-height normalization, meters
  double z_std = 1.0;
};

// ---- head mappings (value and tensor forms) ----

inline std::pair<double, double> head_translation(double wx, double wy) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  return {sig(wx) - 0.5, sig(wy) - 0.5};
}

inline std::pair<Tensor, Tensor> head_translation(const Tensor& wx, const Tensor& wy) {
  return {sub(sigmoid(wx), 0.5), sub(sigmoid(wy), 0.5)};
}

// Signed variant: alpha, beta in (-1,1) via 2*sigmoid - 1, so theta spans the
// full (-pi/2, pi/2]. The literal sigma(.) mapping (theta in (0, pi/4)) is
// kept behind `literal_sigmoid` for comparison.
inline double head_rotation(double wa, double wb, bool literal_sigmoid = false) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double a = literal_sigmoid ? sig(wa) : 2.0 * sig(wa) - 1.0;
  double b = literal_sigmoid ? sig(wb) : 2.0 * sig(wb) - 1.0;
  if (std::abs(a) < kPoleEps && std::abs(b) < kPoleEps) return 0.0;
  return std::atan2(a, b) / 2.0;
}

inline Tensor head_rotation(const Tensor& wa, const Tensor& wb, bool literal_sigmoid = false) {
  Tensor a = literal_sigmoid ? sigmoid(wa) : sub(mul(sigmoid(wa), 2.0), 1.0);
  Tensor b = literal_sigmoid ? sigmoid(wb) : sub(mul(sigmoid(wb), 2.0), 1.0);
  return mul(atan2(a, b), 0.5);
}

inline std::pair<double, double> head_scale_z(double ws, double wz, const DatasetStats& st) {
  return {st.gamma * std::exp(ws), wz};
}

inline std::pair<Tensor, Tensor> head_scale_z(const Tensor& ws, const Tensor& wz,
                                              const DatasetStats& st) {
  return {mul(exp(ws), st.gamma), wz};
}

// ---- grid generation and sampling ----

// Per-output-pixel source coordinates in normalized [-1,1]^2 space.
struct SamplingGrid {
  int64_t h = 0, w = 0;
  std::vector<double> sx, sy;  // row-major, length h*w
};

// Normalized coordinate of pixel index i along an extent of n:
// (-1,-1) is the top-left pixel center, (+1,+1) the bottom-right.
inline double pixel_to_norm(int64_t i, int64_t n) {
  return n > 1 ? -1.0 + 2.0 * double(i) / double(n - 1) : 0.0;
}
inline double pixel_to_norm_d(double i, int64_t n) {
  return n > 1 ? -1.0 + 2.0 * i / double(n - 1) : 0.0;
}
inline double norm_to_pixel(double c, int64_t n) { return (c + 1.0) * 0.5 * double(n - 1); }

inline SamplingGrid affine_grid(const AffineParams& params, int64_t out_h, int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw TensorError("affine_grid: output size must be >= 1");
  auto m = params.normalized();
  SamplingGrid g;
  g.h = out_h;
  g.w = out_w;
  g.sx.resize(size_t(out_h * out_w));
  g.sy.resize(size_t(out_h * out_w));
  for (int64_t i = 0; i < out_h; ++i) {
    double yt = pixel_to_norm(i, out_h);
    for (int64_t j = 0; j < out_w; ++j) {
      double xt = pixel_to_norm(j, out_w);
      size_t k = size_t(i * out_w + j);
      g.sx[k] = m[0] * xt + m[1] * yt + m[2];
      g.sy[k] = m[3] * xt + m[4] * yt + m[5];
    }
  }
  return g;
}

namespace detail {
// Bilinear corner gather with constant (background) padding.
struct Corners {
  int64_t x0, y0;
  double fx, fy;          // fractional offsets
  double v00, v01, v10, v11;
  bool in00, in01, in10, in11;
};

inline Corners gather_corners(const double* img, int64_t H, int64_t W, double px, double py,
                              double background) {
  Corners c;
  double fx0 = std::floor(px), fy0 = std::floor(py);
  c.x0 = int64_t(fx0);
  c.y0 = int64_t(fy0);
  c.fx = px - fx0;
  c.fy = py - fy0;
  auto at = [&](int64_t y, int64_t x, bool& in) -> double {
    in = (x >= 0 && x < W && y >= 0 && y < H);
    return in ? img[y * W + x] : background;
  };
  c.v00 = at(c.y0, c.x0, c.in00);
  c.v01 = at(c.y0, c.x0 + 1, c.in01);
  c.v10 = at(c.y0 + 1, c.x0, c.in10);
  c.v11 = at(c.y0 + 1, c.x0 + 1, c.in11);
  return c;
}
}  // namespace detail

// Differentiable in the image; the grid is a fixed value. Out-of-bounds
// sources read the constant background depth (table plane).
inline Tensor bilinear_sample(const Tensor& image, const SamplingGrid& grid,
                              double background = 0.0) {
  if (image.shape().size() != 2)
    throw TensorError("bilinear_sample: expected 2D image, got " + shape_str(image.shape()));
  int64_t H = image.shape()[0], W = image.shape()[1];
  std::vector<double> out(size_t(grid.h * grid.w));
  const double* img = image.data().data();
  for (size_t k = 0; k < out.size(); ++k) {
    double px = norm_to_pixel(grid.sx[k], W);
    double py = norm_to_pixel(grid.sy[k], H);
    auto c = detail::gather_corners(img, H, W, px, py, background);
    out[k] = (1 - c.fy) * ((1 - c.fx) * c.v00 + c.fx * c.v01) +
             c.fy * ((1 - c.fx) * c.v10 + c.fx * c.v11);
  }
  Tensor im = image;
  auto g = std::make_shared<SamplingGrid>(grid);
  return detail::make_result(
      Shape{grid.h, grid.w}, std::move(out), {image}, [im, g, H, W, background](detail::Node& node) {
        auto p = im.node();
        p->ensure_grad();
        const double* img = p->data.data();
        for (size_t k = 0; k < node.grad.size(); ++k) {
          double gr = node.grad[k];
          if (gr == 0.0) continue;
          double px = norm_to_pixel(g->sx[k], W);
          double py = norm_to_pixel(g->sy[k], H);
          auto c = detail::gather_corners(img, H, W, px, py, background);
          if (c.in00) p->grad[size_t(c.y0 * W + c.x0)] += gr * (1 - c.fy) * (1 - c.fx);
          if (c.in01) p->grad[size_t(c.y0 * W + c.x0 + 1)] += gr * (1 - c.fy) * c.fx;
          if (c.in10) p->grad[size_t((c.y0 + 1) * W + c.x0)] += gr * c.fy * (1 - c.fx);
          if (c.in11) p->grad[size_t((c.y0 + 1) * W + c.x0 + 1)] += gr * c.fy * c.fx;
        }
      });
}

// Fused grid-generate + sample, differentiable in the image and in the six
// normalized-space matrix entries (scalar tensors). This is the STN
// primitive; head mappings feed it through sigmoid/atan2/exp nodes so
// gradients reach the raw localization outputs.
inline Tensor affine_sample(const Tensor& image, const std::array<Tensor, 6>& m,
                            int64_t out_h, int64_t out_w, double background = 0.0) {
  if (image.shape().size() != 2)
    throw TensorError("affine_sample: expected 2D image, got " + shape_str(image.shape()));
  for (const auto& e : m)
    if (e.numel() != 1) throw TensorError("affine_sample: matrix entries must be scalars");
  int64_t H = image.shape()[0], W = image.shape()[1];
  std::array<double, 6> mv;
  for (int i = 0; i < 6; ++i) mv[size_t(i)] = m[size_t(i)].item();

  std::vector<double> out(size_t(out_h * out_w));
  const double* img = image.data().data();
  for (int64_t i = 0; i < out_h; ++i) {
    double yt = pixel_to_norm(i, out_h);
    for (int64_t j = 0; j < out_w; ++j) {
      double xt = pixel_to_norm(j, out_w);
      double sx = mv[0] * xt + mv[1] * yt + mv[2];
      double sy = mv[3] * xt + mv[4] * yt + mv[5];
      auto c = detail::gather_corners(img, H, W, norm_to_pixel(sx, W), norm_to_pixel(sy, H),
                                      background);
      out[size_t(i * out_w + j)] = (1 - c.fy) * ((1 - c.fx) * c.v00 + c.fx * c.v01) +
                                   c.fy * ((1 - c.fx) * c.v10 + c.fx * c.v11);
    }
  }

  Tensor im = image;
  std::array<Tensor, 6> ms = m;
  std::vector<Tensor> parents{image, m[0], m[1], m[2], m[3], m[4], m[5]};
  return detail::make_result(
      Shape{out_h, out_w}, std::move(out), parents,
      [im, ms, mv, H, W, out_h, out_w, background](detail::Node& node) {
        auto p = im.node();
        bool gi = p->requires_grad;
        if (gi) p->ensure_grad();
        std::array<double, 6> gm{};
        bool any_gm = false;
        for (const auto& e : ms) any_gm = any_gm || e.requires_grad();
        const double* img = p->data.data();
        double half_w = 0.5 * double(W - 1), half_h = 0.5 * double(H - 1);
        for (int64_t i = 0; i < out_h; ++i) {
          double yt = pixel_to_norm(i, out_h);
          for (int64_t j = 0; j < out_w; ++j) {
            double gr = node.grad[size_t(i * out_w + j)];
            if (gr == 0.0) continue;
            double xt = pixel_to_norm(j, out_w);
            double sx = mv[0] * xt + mv[1] * yt + mv[2];
            double sy = mv[3] * xt + mv[4] * yt + mv[5];
            auto c = detail::gather_corners(img, H, W, norm_to_pixel(sx, W),
                                            norm_to_pixel(sy, H), background);
            if (gi) {
              if (c.in00) p->grad[size_t(c.y0 * W + c.x0)] += gr * (1 - c.fy) * (1 - c.fx);
              if (c.in01) p->grad[size_t(c.y0 * W + c.x0 + 1)] += gr * (1 - c.fy) * c.fx;
              if (c.in10) p->grad[size_t((c.y0 + 1) * W + c.x0)] += gr * c.fy * (1 - c.fx);
              if (c.in11) p->grad[size_t((c.y0 + 1) * W + c.x0 + 1)] += gr * c.fy * c.fx;
            }
            if (any_gm) {
              // d(out)/d(pixel coords), then chain to normalized coords and
              // to the matrix entries.
              double dpx = (1 - c.fy) * (c.v01 - c.v00) + c.fy * (c.v11 - c.v10);
              double dpy = (1 - c.fx) * (c.v10 - c.v00) + c.fx * (c.v11 - c.v01);
              double dsx = gr * dpx * half_w;
              double dsy = gr * dpy * half_h;
              gm[0] += dsx * xt;
              gm[1] += dsx * yt;
              gm[2] += dsx;
              gm[3] += dsy * xt;
              gm[4] += dsy * yt;
              gm[5] += dsy;
            }
          }
        }
        for (int k = 0; k < 6; ++k) {
          auto pm = ms[size_t(k)].node();
          if (pm->requires_grad) {
            pm->ensure_grad();
            pm->grad[0] += gm[size_t(k)];
          }
        }
      });
}

// Matrix-entry tensors for each constrained stage, built from head outputs so
// the chain raw -> (x,y | theta | s) -> matrix -> sample is differentiable.
inline std::array<Tensor, 6> translation_matrix(const Tensor& x, const Tensor& y) {
  Tensor one = Tensor::scalar(1.0), zero = Tensor::scalar(0.0);
  return {one, zero, mul(x, 2.0), zero, one, mul(y, 2.0)};
}

inline std::array<Tensor, 6> rotation_matrix(const Tensor& theta) {
  Tensor c = cos(theta), s = sin(theta), zero = Tensor::scalar(0.0);
  return {c, neg(s), zero, s, c, zero};
}

inline std::array<Tensor, 6> scale_matrix(const Tensor& s) {
  Tensor zero = Tensor::scalar(0.0);
  return {s, zero, zero, zero, s, zero};
}

// Single matrix equivalent to sampling with translation, then rotation, then
// scale, in normalized space: M = Mt * Mr * Ms (homogeneous product).
inline std::array<double, 6> compose_cascade(const AffineParams& t, const AffineParams& r,
                                             const AffineParams& c) {
  if (t.kind != AffineKind::Translation || r.kind != AffineKind::Rotation ||
      c.kind != AffineKind::Scale)
    throw TensorError("compose_cascade: expected (Translation, Rotation, Scale)");
  auto mt = t.normalized();
  auto mr = r.normalized();
  auto mc = c.normalized();
  auto mulmat = [](const std::array<double, 6>& a, const std::array<double, 6>& b) {
    // rows of a times homogeneous columns of b
    return std::array<double, 6>{
        a[0] * b[0] + a[1] * b[3], a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
        a[3] * b[0] + a[4] * b[3], a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]};
  };
  return mulmat(mt, mulmat(mr, mc));
}

inline SamplingGrid grid_from_matrix(const std::array<double, 6>& m, int64_t out_h,
                                     int64_t out_w) {
  SamplingGrid g;
  g.h = out_h;
  g.w = out_w;
  g.sx.resize(size_t(out_h * out_w));
  g.sy.resize(size_t(out_h * out_w));
  for (int64_t i = 0; i < out_h; ++i) {
    double yt = pixel_to_norm(i, out_h);
    for (int64_t j = 0; j < out_w; ++j) {
      double xt = pixel_to_norm(j, out_w);
      size_t k = size_t(i * out_w + j);
      g.sx[k] = m[0] * xt + m[1] * yt + m[2];
      g.sy[k] = m[3] * xt + m[4] * yt + m[5];
    }
  }
  return g;
}

}  // namespace gqstn
