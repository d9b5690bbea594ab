#pragma once

#include <algorithm>

#include "gqstn/grad_check.hpp"
#include "gqstn/quality.hpp"
#include "gqstn/rng.hpp"
#include "gqstn/stn.hpp"

namespace gqstn {

// Seeded finite-difference sweep over the whole op set, the sampler
// parameters and the classifier input path. Inputs are drawn away from the
// non-smooth points (ReLU/max/bilinear kinks) where central differences are
// meaningless.

struct OpCheck {
  std::string name;
  int cases = 0;
  bool pass = true;
  CheckReport worst;  // highest max_rel_err seen
};

namespace gradsuite {

inline Tensor rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), false);
}

// values bounded away from zero (ReLU kink, atan2 pole, log domain edge)
inline Tensor rand_away(Rng& rng, Shape shape, double margin = 0.05) {
  Tensor t = rand_tensor(rng, std::move(shape));
  for (auto& v : t.data()) v += v >= 0 ? margin : -margin;
  return t;
}

// distinct values with gaps far above the FD step (max_pool tie safety)
inline Tensor rand_distinct(Rng& rng, Shape shape) {
  Tensor t = rand_tensor(rng, std::move(shape));
  std::vector<double> v(t.data().size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = -1.0 + 2.0 * double(i) / double(v.size());
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[size_t(rng.uniform_int(0, int64_t(i) - 1))]);
  t.data() = v;
  return t;
}

// scalarize through a fixed random probe so every output element is covered
inline Tensor probe_sum(const Tensor& y, const Tensor& probe) { return sum(mul(y, probe)); }

struct Case {
  std::string name;
  std::function<CheckReport(Rng&)> run;
};

inline std::vector<Case> cases() {
  std::vector<Case> cs;
  auto binary = [](const char* name, Tensor (*op)(const Tensor&, const Tensor&)) {
    return Case{name, [op](Rng& rng) {
      Tensor probe = rand_tensor(rng, {3, 4});
      return grad_check([&](const std::vector<Tensor>& in) {
        return probe_sum(op(in[0], in[1]), probe);
      }, {rand_tensor(rng, {3, 4}), rand_tensor(rng, {3, 4})});
    }};
  };
  cs.push_back(binary("add", add));
  cs.push_back(binary("sub", sub));
  cs.push_back(binary("mul", mul));
  cs.push_back({"mul_scalar", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {3, 4});
    double k = rng.uniform(-2, 2);
    return grad_check([&](const Tensor& x) { return probe_sum(mul(x, k), probe); },
                      rand_tensor(rng, {3, 4}));
  }});

  auto unary = [](const char* name, Tensor (*op)(const Tensor&), bool away, double lo, double hi) {
    return Case{name, [op, away, lo, hi](Rng& rng) {
      Tensor probe = rand_tensor(rng, {3, 4});
      Tensor x = away ? rand_away(rng, {3, 4}) : rand_tensor(rng, {3, 4});
      if (lo != -1.0 || hi != 1.0)
        for (auto& v : x.data()) v = lo + (hi - lo) * (v + 1.0) / 2.0;
      return grad_check([&](const Tensor& in) { return probe_sum(op(in), probe); }, x);
    }};
  };
  cs.push_back(unary("relu", relu, true, -1, 1));
  cs.push_back(unary("sigmoid", sigmoid, false, -3, 3));
  cs.push_back(unary("tanh", tanh, false, -3, 3));
  cs.push_back(unary("exp", exp, false, -1, 1));
  cs.push_back(unary("log", log, false, 0.3, 2.5));
  cs.push_back(unary("sin", sin, false, -3, 3));
  cs.push_back(unary("cos", cos, false, -3, 3));
  cs.push_back(unary("neg", neg, false, -1, 1));

  cs.push_back({"atan2", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {3, 4});
    return grad_check([&](const std::vector<Tensor>& in) {
      return probe_sum(atan2(in[0], in[1]), probe);
    }, {rand_away(rng, {3, 4}, 0.3), rand_away(rng, {3, 4}, 0.3)});
  }});

  cs.push_back({"matmul", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {3, 2});
    return grad_check([&](const std::vector<Tensor>& in) {
      return probe_sum(matmul(in[0], in[1]), probe);
    }, {rand_tensor(rng, {3, 4}), rand_tensor(rng, {4, 2})});
  }});

  cs.push_back({"conv2d_same_s1", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {1, 3, 6, 6});
    return grad_check([&](const std::vector<Tensor>& in) {
      return probe_sum(conv2d(in[0], in[1], 1, Padding::Same), probe);
    }, {rand_tensor(rng, {1, 2, 6, 6}), rand_tensor(rng, {3, 2, 3, 3})});
  }});
  cs.push_back({"conv2d_valid_s2", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {1, 2, 3, 3});
    return grad_check([&](const std::vector<Tensor>& in) {
      return probe_sum(conv2d(in[0], in[1], 2, Padding::Valid), probe);
    }, {rand_tensor(rng, {1, 2, 7, 7}), rand_tensor(rng, {2, 2, 3, 3})});
  }});

  cs.push_back({"max_pool2d", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {1, 2, 4, 4});
    return grad_check([&](const Tensor& x) { return probe_sum(max_pool2d(x, 2), probe); },
                      rand_distinct(rng, {1, 2, 8, 8}), 1e-6);
  }});
  cs.push_back({"global_avg_pool", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {1, 3});
    return grad_check([&](const Tensor& x) { return probe_sum(global_avg_pool(x), probe); },
                      rand_tensor(rng, {1, 3, 4, 4}));
  }});

  cs.push_back({"sum", [](Rng& rng) {
    return grad_check([](const Tensor& x) { return sum(x); }, rand_tensor(rng, {3, 4}));
  }});
  cs.push_back({"mean", [](Rng& rng) {
    return grad_check([](const Tensor& x) { return mean(x); }, rand_tensor(rng, {3, 4}));
  }});
  cs.push_back({"l2_norm", [](Rng& rng) {
    return grad_check([](const Tensor& x) { return l2_norm(x); }, rand_away(rng, {5}, 0.2));
  }});
  cs.push_back({"softmax", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {6});
    return grad_check([&](const Tensor& x) { return probe_sum(softmax(x), probe); },
                      rand_tensor(rng, {6}));
  }});
  cs.push_back({"bce_with_logits", [](Rng& rng) {
    Tensor targets = rand_tensor(rng, {4}, 0.05, 0.95);
    targets.set_requires_grad(false);
    return grad_check([&](const Tensor& logits) {
      return binary_cross_entropy_with_logits(logits, targets);
    }, rand_tensor(rng, {4}, -3, 3));
  }});
  cs.push_back({"reshape", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {2, 6});
    return grad_check([&](const Tensor& x) { return probe_sum(reshape(x, {2, 6}), probe); },
                      rand_tensor(rng, {3, 4}));
  }});
  cs.push_back({"concat0", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {4, 3});
    return grad_check([&](const std::vector<Tensor>& in) {
      return probe_sum(concat0(in[0], in[1]), probe);
    }, {rand_tensor(rng, {2, 3}), rand_tensor(rng, {2, 3})});
  }});
  cs.push_back({"select", [](Rng& rng) {
    int64_t i = rng.uniform_int(0, 11);
    return grad_check([i](const Tensor& x) { return select(x, i); }, rand_tensor(rng, {3, 4}));
  }});

  // fused sampler: gradient w.r.t. the image and all six matrix entries
  cs.push_back({"affine_sample", [](Rng& rng) {
    Tensor probe = rand_tensor(rng, {5, 5});
    return grad_check([&](const std::vector<Tensor>& in) {
      std::array<Tensor, 6> m = {in[1], in[2], in[3], in[4], in[5], in[6]};
      return probe_sum(affine_sample(in[0], m, 5, 5, 0.0), probe);
    }, {rand_tensor(rng, {8, 8}),
        Tensor::scalar(rng.uniform(0.4, 0.9)), Tensor::scalar(rng.uniform(-0.3, 0.3)),
        Tensor::scalar(rng.uniform(-0.2, 0.2)), Tensor::scalar(rng.uniform(-0.3, 0.3)),
        Tensor::scalar(rng.uniform(0.4, 0.9)), Tensor::scalar(rng.uniform(-0.2, 0.2))},
        1e-6);
  }});

  // constrained sampler cascade: gradients w.r.t. x, y, theta, s
  cs.push_back({"sampler_constrained", [](Rng& rng) {
    Tensor img = rand_tensor(rng, {10, 10});
    Tensor probe = rand_tensor(rng, {5, 5});
    return grad_check([&](const std::vector<Tensor>& in) {
      Tensor o1 = affine_sample(img, translation_matrix(in[0], in[1]), 8, 8, 0.0);
      Tensor o2 = affine_sample(o1, rotation_matrix(in[2]), 8, 8, 0.0);
      return probe_sum(affine_sample(o2, scale_matrix(in[3]), 5, 5, 0.0), probe);
    }, {Tensor::scalar(rng.uniform(-0.2, 0.2)), Tensor::scalar(rng.uniform(-0.2, 0.2)),
        Tensor::scalar(rng.uniform(-1.0, 1.0)), Tensor::scalar(rng.uniform(0.3, 0.8))},
        1e-6);
  }});

  // classifier input path: logit gradient w.r.t. the crop and z plane
  cs.push_back({"classifier_input", [](Rng& rng) {
    BackboneConfig cfg = quality_backbone_config();
    cfg.channels = {2, 4};
    cfg.residual = false;
    QualityModel m;
    m.net = Backbone(cfg, rng.uniform_int(0, 1 << 30));
    for (auto& [name, t] : m.net.params().named)
      for (auto& v : t.data()) v = rng.normal(0, 0.3);
    m.freeze();
    Tensor crop = rand_tensor(rng, {kCropSize, kCropSize}, 0.64, 0.70);
    Tensor z = Tensor::scalar(rng.uniform(-1, 1));
    return grad_check([&](const std::vector<Tensor>& in) {
      return select(m.net.forward(classifier_input(m, in[0], in[1])), 0);
    }, {crop, z}, 1e-6);
  }});

  return cs;
}

}  // namespace gradsuite

inline std::vector<OpCheck> run_grad_suite(int cases_per_op, uint64_t seed) {
  std::vector<OpCheck> out;
  auto cs = gradsuite::cases();
  for (size_t k = 0; k < cs.size(); ++k) {
    OpCheck oc;
    oc.name = cs[k].name;
    for (int i = 0; i < cases_per_op; ++i) {
      Rng rng(derive_seed(seed, k * 100003 + uint64_t(i)));
      CheckReport rep = cs[k].run(rng);
      ++oc.cases;
      if (rep.max_rel_err >= oc.worst.max_rel_err) oc.worst = rep;
      if (!rep.pass) oc.pass = false;
    }
    out.push_back(std::move(oc));
  }
  return out;
}

}  // namespace gqstn
