#pragma once

#include <cmath>
#include <vector>

namespace gqstn {

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
  Vec2 normalized() const {
    double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
  Vec2 perp() const { return {-y, x}; }
};

using Polygon = std::vector<Vec2>;  // CCW vertex order

inline double polygon_area(const Polygon& p) {
  double a = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.cross(v);
  }
  return 0.5 * std::abs(a);
}

// Sutherland-Hodgman: clip `subject` by convex `clip` (CCW).
inline Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    Vec2 a = clip[i], b = clip[(i + 1) % clip.size()];
    Vec2 edge = b - a;
    Polygon in;
    in.swap(out);
    for (size_t j = 0; j < in.size(); ++j) {
      Vec2 p = in[j], q = in[(j + 1) % in.size()];
      double sp = edge.cross(p - a);
      double sq = edge.cross(q - a);
      bool pin = sp >= 0, qin = sq >= 0;
      if (pin) out.push_back(p);
      if (pin != qin) {
        double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

// Oriented rectangle: center, axis angle, full extents along/across the axis.
inline Polygon oriented_rect(Vec2 center, double angle, double width, double height) {
  double c = std::cos(angle), s = std::sin(angle);
  Vec2 ax{c, s}, ay{-s, c};
  Vec2 hw = ax * (width / 2), hh = ay * (height / 2);
  return {center - hw - hh, center + hw - hh, center + hw + hh, center - hw + hh};
}

// Jaccard index of two convex polygons via exact clipping.
inline double polygon_iou(const Polygon& a, const Polygon& b) {
  double inter = polygon_area(clip_convex(a, b));
  double uni = polygon_area(a) + polygon_area(b) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline bool point_in_convex(const Polygon& poly, Vec2 p) {
  for (size_t i = 0; i < poly.size(); ++i) {
    Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    if ((b - a).cross(p - a) < 0) return false;
  }
  return true;
}

// Angle difference reduced modulo pi (two-fold gripper symmetry), in [0, pi/2].
inline double angle_diff_mod_pi(double a, double b) {
  double d = std::fmod(std::abs(a - b), 3.14159265358979323846);
  return std::min(d, 3.14159265358979323846 - d);
}

}  // namespace gqstn
