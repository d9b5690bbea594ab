#pragma once

#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "gqstn/binio.hpp"
#include "gqstn/geometry.hpp"
#include "gqstn/grasp.hpp"
#include "gqstn/rng.hpp"

namespace gqstn {

// ---- primitive shapes (top-down prisms) ----

struct Primitive {
  enum class Kind { Box, Cylinder, Ngon };
  Kind kind = Kind::Box;
  Vec2 center;        // meters, scene frame (origin at image center, y down)
  double angle = 0;   // radians
  double half_a = 0;  // box: half extent along local x; ngon/cylinder: circumradius
  double half_b = 0;  // box: half extent along local y
  int sides = 6;      // ngon
  double height = 0;  // meters

  // Convex footprint polygon (cylinder handled separately).
  Polygon polygon() const {
    Polygon p;
    if (kind == Kind::Box) {
      p = oriented_rect(center, angle, 2 * half_a, 2 * half_b);
    } else if (kind == Kind::Ngon) {
      for (int i = 0; i < sides; ++i) {
        double a = angle + 2.0 * kPi * double(i) / double(sides);
        p.push_back(center + Vec2{std::cos(a), std::sin(a)} * half_a);
      }
    }
    return p;
  }

  bool contains(Vec2 p) const {
    if (kind == Kind::Cylinder) return (p - center).norm() <= half_a;
    return point_in_convex(polygon(), p);
  }

  double max_radius() const {
    if (kind == Kind::Box) return std::sqrt(half_a * half_a + half_b * half_b);
    return half_a;
  }
};

// Union of at most 3 primitives; every object fits the 5 cm gripper band.
struct PrimitiveShape {
  std::vector<Primitive> parts;

  bool contains(Vec2 p) const {
    for (const auto& part : parts)
      if (part.contains(p)) return true;
    return false;
  }

  double height_at(Vec2 p) const {
    double h = 0;
    for (const auto& part : parts)
      if (part.contains(p)) h = std::max(h, part.height);
    return h;
  }

  const char* kind_name() const {
    if (parts.size() > 1) return "union";
    switch (parts[0].kind) {
      case Primitive::Kind::Box: return "box";
      case Primitive::Kind::Cylinder: return "cylinder";
      default: return "ngon";
    }
  }
};

struct OracleConfig {
  double friction_coeff = 0.5;
  double max_opening = 0.05;      // meters
  double clearance_depth = 0.002; // fingers must overlap the object by this much
  double contact_tol = 1e-4;      // meters
};

// ---- scene frame helpers ----

inline Vec2 pixel_to_scene(double px, double py, const ImageMeta& m) {
  return {(px - double(m.width - 1) / 2.0) * m.pixel_scale,
          (py - double(m.height - 1) / 2.0) * m.pixel_scale};
}
inline void scene_to_pixel(Vec2 p, const ImageMeta& m, double& px, double& py) {
  px = p.x / m.pixel_scale + double(m.width - 1) / 2.0;
  py = p.y / m.pixel_scale + double(m.height - 1) / 2.0;
}

// ---- line-footprint machinery ----

namespace detail {

struct Hit {
  double t;      // line parameter, meters
  Vec2 normal;   // outward
};

// Interval of the line o + t*d inside one primitive, with boundary normals.
inline std::optional<std::pair<Hit, Hit>> line_interval(const Primitive& prim, Vec2 o, Vec2 d) {
  if (prim.kind == Primitive::Kind::Cylinder) {
    Vec2 rel = o - prim.center;
    double b = rel.dot(d), c = rel.dot(rel) - prim.half_a * prim.half_a;
    double disc = b * b - c;
    if (disc <= 0) return std::nullopt;
    double sq = std::sqrt(disc);
    double t0 = -b - sq, t1 = -b + sq;
    auto nrm = [&](double t) { return ((o + d * t) - prim.center).normalized(); };
    return std::make_pair(Hit{t0, nrm(t0)}, Hit{t1, nrm(t1)});
  }
  Polygon poly = prim.polygon();
  double t_in = -1e18, t_out = 1e18;
  Vec2 n_in, n_out;
  // convex polygon slab clipping against each edge half-plane
  for (size_t i = 0; i < poly.size(); ++i) {
    Vec2 a = poly[i], b2 = poly[(i + 1) % poly.size()];
    Vec2 edge = b2 - a;
    Vec2 n = Vec2{edge.y, -edge.x}.normalized();  // outward for CCW
    double denom = n.dot(d);
    double dist = n.dot(o - a);
    if (std::abs(denom) < 1e-15) {
      if (dist > 0) return std::nullopt;  // parallel and outside
      continue;
    }
    double t = -dist / denom;
    if (denom < 0) {  // entering
      if (t > t_in) { t_in = t; n_in = n; }
    } else {  // leaving
      if (t < t_out) { t_out = t; n_out = n; }
    }
  }
  if (t_in >= t_out) return std::nullopt;
  return std::make_pair(Hit{t_in, n_in}, Hit{t_out, n_out});
}

struct SpanSet {
  // merged occupied intervals along the closing line (active parts only)
  std::vector<std::pair<Hit, Hit>> spans;
  bool empty() const { return spans.empty(); }
  double t_lo() const { return spans.front().first.t; }
  double t_hi() const { return spans.back().second.t; }
  Vec2 n_lo() const { return spans.front().first.normal; }
  Vec2 n_hi() const { return spans.back().second.normal; }
};

inline SpanSet line_spans(const PrimitiveShape& shape, Vec2 o, Vec2 d, double min_height) {
  std::vector<std::pair<Hit, Hit>> raw;
  for (const auto& part : shape.parts) {
    if (part.height <= min_height) continue;  // below the fingers
    if (auto iv = line_interval(part, o, d)) raw.push_back(*iv);
  }
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first.t < b.first.t; });
  SpanSet out;
  for (auto& iv : raw) {
    if (!out.spans.empty() && iv.first.t <= out.spans.back().second.t) {
      if (iv.second.t > out.spans.back().second.t) out.spans.back().second = iv.second;
    } else {
      out.spans.push_back(iv);
    }
  }
  return out;
}

}  // namespace detail

// ---- analytic antipodal oracle ----

struct OracleResult {
  bool robust = false;
  double quality = 0.0;
};

// Friction-cone antipodal test with collision clearance; the desk-scale
// stand-in for a wrench-space robustness metric. Quality is the min of the
// four normalized margins (two friction cones, opening, jaw clearance).
inline OracleResult oracle_eval(const PrimitiveShape& shape, const GraspConfig& g,
                                const OracleConfig& cfg, const ImageMeta& meta) {
  OracleResult res;
  if (g.z < 0 || g.w <= 0) return res;
  Vec2 o = pixel_to_scene(g.x, g.y, meta);
  Vec2 d{std::cos(g.theta), std::sin(g.theta)};
  auto spans = detail::line_spans(shape, o, d, g.z + cfg.clearance_depth);
  if (spans.empty()) return res;

  double half = g.w / 2.0;
  double t_lo = spans.t_lo(), t_hi = spans.t_hi();
  // jaws descend at +-w/2: the object must fit strictly inside the span
  if (t_lo <= -half + cfg.contact_tol || t_hi >= half - cfg.contact_tol) return res;

  double sep = t_hi - t_lo;
  double max_sep = std::min(g.w, cfg.max_opening);
  if (sep > max_sep) return res;

  double cone = std::atan(cfg.friction_coeff);
  // jaw at t_hi pushes along -d, so its contact normal should align with +d
  double ang_hi = std::acos(std::clamp(spans.n_hi().dot(d), -1.0, 1.0));
  double ang_lo = std::acos(std::clamp(spans.n_lo().dot(d * -1.0), -1.0, 1.0));
  if (ang_hi > cone || ang_lo > cone) return res;

  double m1 = 1.0 - ang_lo / cone;
  double m2 = 1.0 - ang_hi / cone;
  double m3 = 1.0 - sep / max_sep;
  double m4 = std::min(half - t_hi, t_lo + half) / half;
  res.quality = std::clamp(std::min(std::min(m1, m2), std::min(m3, m4)), 0.0, 1.0);
  res.robust = res.quality > 0.0;
  return res;
}

// ---- rendering ----

inline DepthImage render_scene(const PrimitiveShape& shape, const ImageMeta& meta,
                               uint64_t seed, double noise_sigma = 0.0) {
  // frame check: every part must fit inside the image extent
  double half_w = double(meta.width - 1) / 2.0 * meta.pixel_scale;
  double half_h = double(meta.height - 1) / 2.0 * meta.pixel_scale;
  for (const auto& part : shape.parts) {
    double r = part.max_radius();
    if (std::abs(part.center.x) + r > half_w || std::abs(part.center.y) + r > half_h)
      throw TensorError("render_scene: shape out of frame");
  }
  DepthImage im;
  im.meta = meta;
  im.depth.resize(size_t(meta.height * meta.width));
  Rng rng(seed);
  for (int64_t i = 0; i < meta.height; ++i)
    for (int64_t j = 0; j < meta.width; ++j) {
      Vec2 p = pixel_to_scene(double(j), double(i), meta);
      double h = shape.height_at(p);
      double depth = meta.camera_height - h;
      if (noise_sigma > 0) depth += rng.normal(0.0, noise_sigma);
      im.depth[size_t(i * meta.width + j)] = depth;
    }
  return im;
}

// ---- annotation sampling ----

struct Annotation {
  GraspConfig grasp;
  bool robust = false;
  float quality = 0.0f;
};

namespace detail {
// Uniform boundary point + outward normal on one primitive.
inline std::pair<Vec2, Vec2> boundary_point(const Primitive& prim, double u) {
  if (prim.kind == Primitive::Kind::Cylinder) {
    double a = 2.0 * kPi * u;
    Vec2 n{std::cos(a), std::sin(a)};
    return {prim.center + n * prim.half_a, n};
  }
  Polygon poly = prim.polygon();
  double per = 0;
  std::vector<double> lens(poly.size());
  for (size_t i = 0; i < poly.size(); ++i) {
    lens[i] = (poly[(i + 1) % poly.size()] - poly[i]).norm();
    per += lens[i];
  }
  double target = u * per;
  for (size_t i = 0; i < poly.size(); ++i) {
    if (target <= lens[i] || i + 1 == poly.size()) {
      Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
      Vec2 e = b - a;
      Vec2 n = Vec2{e.y, -e.x}.normalized();
      return {a + e * (lens[i] > 0 ? target / lens[i] : 0.0), n};
    }
    target -= lens[i];
  }
  return {poly[0], {1, 0}};
}
}  // namespace detail

// Rejection-sample antipodal candidates and label via the oracle.
inline std::vector<Annotation> sample_annotations(const PrimitiveShape& shape,
                                                  const ImageMeta& meta, int n_pos, int n_neg,
                                                  uint64_t seed, const OracleConfig& cfg) {
  Rng rng(seed);
  std::vector<Annotation> out;
  double min_h = 1e9;
  for (const auto& part : shape.parts) min_h = std::min(min_h, part.height);

  auto make_candidate = [&](bool aim_good) -> GraspConfig {
    const Primitive& part = shape.parts[size_t(rng.uniform_int(0, int64_t(shape.parts.size()) - 1))];
    auto [p1, n1] = detail::boundary_point(part, rng.uniform());
    double jitter = aim_good ? rng.uniform(-0.12, 0.12) : rng.uniform(-0.9, 0.9);
    double dir_ang = std::atan2(-n1.y, -n1.x) + jitter;
    Vec2 d{std::cos(dir_ang), std::sin(dir_ang)};
    GraspConfig g;
    g.z = rng.uniform(0.1, 0.6) * min_h;
    auto spans = detail::line_spans(shape, p1, d, g.z + cfg.clearance_depth);
    double cx, cy;
    if (!spans.empty()) {
      Vec2 c = p1 + d * ((spans.t_lo() + spans.t_hi()) / 2.0);
      double sep = spans.t_hi() - spans.t_lo();
      g.w = std::min(cfg.max_opening, sep * rng.uniform(1.35, 1.9));
      scene_to_pixel(c, meta, cx, cy);
    } else {
      g.w = rng.uniform(0.3, 1.0) * cfg.max_opening;
      scene_to_pixel(p1, meta, cx, cy);
    }
    if (!aim_good) {
      cx += rng.normal(0, 6.0);
      cy += rng.normal(0, 6.0);
      g.w = rng.uniform(0.25, 1.0) * cfg.max_opening;
    }
    g.x = std::clamp(cx, 0.0, double(meta.width - 1));
    g.y = std::clamp(cy, 0.0, double(meta.height - 1));
    g.theta = GraspConfig::canonical_angle(dir_ang);
    return g;
  };

  const int kMaxTries = 20000;
  int found_pos = 0, tries = 0;
  while (found_pos < n_pos) {
    if (++tries > kMaxTries)
      throw TensorError(std::string("sample_annotations: cannot find ") +
                        std::to_string(n_pos) + " positive grasps on shape " +
                        shape.kind_name());
    GraspConfig g = make_candidate(true);
    auto r = oracle_eval(shape, g, cfg, meta);
    if (r.robust) {
      out.push_back({g, true, float(r.quality)});
      ++found_pos;
    }
  }
  int found_neg = 0;
  tries = 0;
  while (found_neg < n_neg) {
    if (++tries > kMaxTries)
      throw TensorError(std::string("sample_annotations: cannot find ") +
                        std::to_string(n_neg) + " negative grasps on shape " +
                        shape.kind_name());
    GraspConfig g = make_candidate(false);
    auto r = oracle_eval(shape, g, cfg, meta);
    if (!r.robust) {
      out.push_back({g, false, float(r.quality)});
      ++found_neg;
    }
  }
  return out;
}

// ---- random shape generation ----

// Objects sized for the 5 cm gripper band: graspable extents <= max_opening.
inline PrimitiveShape random_shape(Rng& rng, const OracleConfig& cfg, const ImageMeta& meta) {
  auto rand_part = [&](Vec2 center) {
    Primitive p;
    p.center = center;
    p.height = rng.uniform(0.02, 0.06);
    int k = int(rng.uniform_int(0, 2));
    double span = cfg.max_opening;
    if (k == 0) {
      p.kind = Primitive::Kind::Box;
      p.half_a = rng.uniform(0.35, 1.0) * span / 2.0;
      p.half_b = rng.uniform(0.25, 0.85) * span / 2.0;
      p.angle = rng.uniform(-kPi, kPi);
    } else if (k == 1) {
      p.kind = Primitive::Kind::Cylinder;
      p.half_a = rng.uniform(0.25, 0.9) * span / 2.0;
    } else {
      p.kind = Primitive::Kind::Ngon;
      // even side counts only: opposing faces are anti-parallel, so every
      // ngon admits friction-cone-valid antipodal grasps
      p.sides = 2 * int(rng.uniform_int(2, 4));
      p.half_a = rng.uniform(0.3, 0.95) * span / 2.0;
      p.angle = rng.uniform(-kPi, kPi);
    }
    return p;
  };
  double lim = std::min(double(meta.width - 1), double(meta.height - 1)) / 2.0 *
               meta.pixel_scale;
  for (;;) {
    // compose parts around the origin, then place the whole shape in-frame
    PrimitiveShape shape;
    shape.parts.push_back(rand_part({0, 0}));
    int extra = rng.uniform() < 0.25 ? int(rng.uniform_int(1, 2)) : 0;
    for (int i = 0; i < extra; ++i) {
      double r0 = shape.parts[0].max_radius();
      Vec2 off{rng.uniform(-0.6 * r0, 0.6 * r0), rng.uniform(-0.6 * r0, 0.6 * r0)};
      Primitive p = rand_part(off);
      p.height = std::min(p.height, shape.parts[0].height);  // keep top surface simple
      shape.parts.push_back(p);
    }
    double radius = 0;
    for (const auto& part : shape.parts)
      radius = std::max(radius, part.center.norm() + part.max_radius());
    if (radius > lim - 0.002) continue;  // rare with these size bands; resample
    double room = lim - 0.001 - radius;
    Vec2 base{rng.uniform(-room, room), rng.uniform(-room, room)};
    for (auto& part : shape.parts) part.center = part.center + base;
    return shape;
  }
}

// ---- dataset records and shard IO ----

struct SceneRecord {
  DepthImage depth;
  std::vector<Annotation> annotations;
  uint64_t seed = 0;
};

struct DatasetSpec {
  int n_scenes = 300;
  ImageMeta meta;
  OracleConfig oracle;
  int n_pos_min = 4, n_pos_max = 8;
  int n_neg_min = 2, n_neg_max = 4;
  double noise_sigma = 0.0;
  double train_frac = 0.8, val_frac = 0.1;  // remainder is test
};

inline constexpr uint32_t kShardVersion = 1;

inline void write_shard(const std::string& path, const std::vector<SceneRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorError("write_shard: cannot open " + path);
  os.write("GQSD", 4);
  detail::write_pod<uint32_t>(os, kShardVersion);
  detail::write_pod<uint32_t>(os, uint32_t(records.size()));
  for (const auto& rec : records) {
    const ImageMeta& m = rec.depth.meta;
    detail::write_pod<uint16_t>(os, uint16_t(m.height));
    detail::write_pod<uint16_t>(os, uint16_t(m.width));
    detail::write_pod<float>(os, float(m.pixel_scale));
    detail::write_pod<float>(os, float(m.camera_height));
    for (double v : rec.depth.depth) detail::write_pod<float>(os, float(v));
    detail::write_pod<uint16_t>(os, uint16_t(rec.annotations.size()));
    for (const auto& a : rec.annotations) {
      detail::write_pod<float>(os, float(a.grasp.x));
      detail::write_pod<float>(os, float(a.grasp.y));
      detail::write_pod<float>(os, float(a.grasp.z));
      detail::write_pod<float>(os, float(a.grasp.theta));
      detail::write_pod<float>(os, float(a.grasp.w));
      detail::write_pod<uint8_t>(os, a.robust ? 1 : 0);
      detail::write_pod<float>(os, a.quality);
    }
  }
  if (!os) throw TensorError("write_shard: write failed for " + path);
}

inline std::vector<SceneRecord> read_shard(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("read_shard: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GQSD", 4) != 0)
    throw TensorError("read_shard: bad magic in " + path);
  uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != kShardVersion)
    throw TensorError("read_shard: unsupported version " + std::to_string(version));
  uint32_t count = detail::read_pod<uint32_t>(is);
  std::vector<SceneRecord> out(count);
  for (auto& rec : out) {
    rec.depth.meta.height = detail::read_pod<uint16_t>(is);
    rec.depth.meta.width = detail::read_pod<uint16_t>(is);
    rec.depth.meta.pixel_scale = detail::read_pod<float>(is);
    rec.depth.meta.camera_height = detail::read_pod<float>(is);
    rec.depth.depth.resize(size_t(rec.depth.meta.height * rec.depth.meta.width));
    for (auto& v : rec.depth.depth) v = detail::read_pod<float>(is);
    uint16_t na = detail::read_pod<uint16_t>(is);
    rec.annotations.resize(na);
    for (auto& a : rec.annotations) {
      a.grasp.x = detail::read_pod<float>(is);
      a.grasp.y = detail::read_pod<float>(is);
      a.grasp.z = detail::read_pod<float>(is);
      a.grasp.theta = detail::read_pod<float>(is);
      a.grasp.w = detail::read_pod<float>(is);
      a.robust = detail::read_pod<uint8_t>(is) != 0;
      a.quality = detail::read_pod<float>(is);
    }
  }
  if (!is) throw TensorError("read_shard: truncated file " + path);
  return out;
}

// Scene for a given index: deterministic in (root_seed, index) only.
inline SceneRecord make_scene(const DatasetSpec& spec, uint64_t root_seed, uint64_t index,
                              PrimitiveShape* shape_out = nullptr) {
  uint64_t seed = derive_seed(root_seed, index);
  Rng rng(seed);
  // retry with re-derived seeds if annotation sampling stalls on a shape
  for (int attempt = 0;; ++attempt) {
    uint64_t aseed = derive_seed(seed, uint64_t(attempt));
    Rng srng(aseed);
    PrimitiveShape shape = random_shape(srng, spec.oracle, spec.meta);
    int n_pos = int(srng.uniform_int(spec.n_pos_min, spec.n_pos_max));
    int n_neg = int(srng.uniform_int(spec.n_neg_min, spec.n_neg_max));
    try {
      SceneRecord rec;
      rec.seed = aseed;
      rec.depth = render_scene(shape, spec.meta, derive_seed(aseed, 1), spec.noise_sigma);
      rec.annotations =
          sample_annotations(shape, spec.meta, n_pos, n_neg, derive_seed(aseed, 2), spec.oracle);
      if (shape_out) *shape_out = shape;
      return rec;
    } catch (const TensorError&) {
      if (attempt > 20) throw;
    }
  }
}

// gamma / z statistics over the positive annotations of a record list.
inline DatasetStats compute_stats(const std::vector<SceneRecord>& records) {
  DatasetStats st;
  double sum_s = 0, sum_z = 0, sum_z2 = 0;
  int64_t n = 0;
  for (const auto& rec : records)
    for (const auto& a : rec.annotations) {
      if (!a.robust) continue;
      sum_s += scale_from_opening_px(a.grasp.w / rec.depth.meta.pixel_scale, rec.depth.meta);
      sum_z += a.grasp.z;
      sum_z2 += a.grasp.z * a.grasp.z;
      ++n;
    }
  if (n == 0) throw TensorError("compute_stats: no positive annotations");
  st.gamma = sum_s / double(n);
  st.z_mean = sum_z / double(n);
  double var = sum_z2 / double(n) - st.z_mean * st.z_mean;
  st.z_std = std::sqrt(std::max(var, 1e-8));
  return st;
}

struct BuiltDataset {
  std::vector<SceneRecord> train, val, test;
  DatasetStats stats;  // computed on the train split only
};

inline BuiltDataset build_dataset_records(const DatasetSpec& spec, uint64_t root_seed) {
  BuiltDataset ds;
  int n_train = int(double(spec.n_scenes) * spec.train_frac);
  int n_val = int(double(spec.n_scenes) * spec.val_frac);
  for (int i = 0; i < spec.n_scenes; ++i) {
    SceneRecord rec = make_scene(spec, root_seed, uint64_t(i));
    if (i < n_train)
      ds.train.push_back(std::move(rec));
    else if (i < n_train + n_val)
      ds.val.push_back(std::move(rec));
    else
      ds.test.push_back(std::move(rec));
  }
  ds.stats = compute_stats(ds.train);
  return ds;
}

// Write the three split shards plus a JSON sidecar describing the spec,
// seed, stats, split manifest and the crop normalization convention.
struct DatasetPaths {
  std::string train, val, test, sidecar;
};

inline DatasetPaths dataset_paths(const std::string& out_dir) {
  return {out_dir + "/train.gqsd", out_dir + "/val.gqsd", out_dir + "/test.gqsd",
          out_dir + "/dataset.json"};
}

inline DatasetPaths build_dataset(const DatasetSpec& spec, uint64_t root_seed,
                                  const std::string& out_dir) {
  BuiltDataset ds = build_dataset_records(spec, root_seed);
  DatasetPaths paths = dataset_paths(out_dir);
  write_shard(paths.train, ds.train);
  write_shard(paths.val, ds.val);
  write_shard(paths.test, ds.test);
  nlohmann::json side;
  side["seed"] = root_seed;
  side["rng"] = kRngId;
  side["spec"] = {{"n_scenes", spec.n_scenes},
                  {"height", spec.meta.height},
                  {"width", spec.meta.width},
                  {"pixel_scale", spec.meta.pixel_scale},
                  {"camera_height", spec.meta.camera_height},
                  {"friction_coeff", spec.oracle.friction_coeff},
                  {"max_opening", spec.oracle.max_opening},
                  {"clearance_depth", spec.oracle.clearance_depth},
                  {"contact_tol", spec.oracle.contact_tol},
                  {"n_pos_min", spec.n_pos_min},
                  {"n_pos_max", spec.n_pos_max},
                  {"n_neg_min", spec.n_neg_min},
                  {"n_neg_max", spec.n_neg_max},
                  {"noise_sigma", spec.noise_sigma},
                  {"train_frac", spec.train_frac},
                  {"val_frac", spec.val_frac}};
  side["stats"] = {{"gamma", ds.stats.gamma}, {"z_mean", ds.stats.z_mean},
                   {"z_std", ds.stats.z_std}};
  side["splits"] = {{"train", ds.train.size()}, {"val", ds.val.size()},
                    {"test", ds.test.size()}};
  // crops fed to models are standardized as (depth - table_depth) / camera_height
  side["depth_normalization"] = "(depth - table_depth) / camera_height";
  std::ofstream os(paths.sidecar);
  if (!os) throw TensorError("build_dataset: cannot open " + paths.sidecar);
  os << side.dump(2) << "\n";
  return paths;
}

}  // namespace gqstn
