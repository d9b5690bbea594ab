#include <gtest/gtest.h>

#include "gqstn/grad_check.hpp"
#include "gqstn/rng.hpp"
#include "gqstn/tensor.hpp"

using namespace gqstn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> d(size_t(numel_of(shape)));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(d));
}

}  // namespace

TEST(Forward, Relu) {
  Tensor x({3}, {-1, 0, 2});
  auto y = relu(x);
  EXPECT_EQ(y.data(), (std::vector<double>{0, 0, 2}));
}

TEST(Forward, SigmoidAtZero) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
}

// conv2d against the direct-summation oracle: all-ones 3x3 kernel over an
// all-ones 5x5 image, valid padding -> 3x3 image of 9s.
TEST(Forward, ConvOnesOracle) {
  Tensor img = Tensor::full({1, 1, 5, 5}, 1.0);
  Tensor ker = Tensor::full({1, 1, 3, 3}, 1.0);
  auto out = conv2d(img, ker, 1, Padding::Valid);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 9.0);
}

// conv2d vs an independent direct-summation oracle on random inputs,
// both paddings and strides.
TEST(Forward, ConvRandomOracle) {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    int64_t H = rng.uniform_int(5, 9), W = rng.uniform_int(5, 9);
    int64_t C = rng.uniform_int(1, 3), F = rng.uniform_int(1, 3);
    int64_t k = rng.uniform_int(1, 3);
    int64_t stride = rng.uniform_int(1, 2);
    Padding pad = rep % 2 ? Padding::Same : Padding::Valid;
    Tensor img = random_tensor({1, C, H, W}, rng);
    Tensor ker = random_tensor({F, C, k, k}, rng);
    auto out = conv2d(img, ker, stride, pad);
    int64_t Ho = out.shape()[2], Wo = out.shape()[3];
    int64_t ph = 0, pw = 0;
    if (pad == Padding::Same) {
      ph = std::max<int64_t>((Ho - 1) * stride + k - H, 0) / 2;
      pw = std::max<int64_t>((Wo - 1) * stride + k - W, 0) / 2;
    }
    for (int64_t f = 0; f < F; ++f)
      for (int64_t ho = 0; ho < Ho; ++ho)
        for (int64_t wo = 0; wo < Wo; ++wo) {
          double acc = 0.0;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < k; ++i)
              for (int64_t j = 0; j < k; ++j) {
                int64_t hi = ho * stride - ph + i, wi = wo * stride - pw + j;
                if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                acc += img.data()[size_t((c * H + hi) * W + wi)] *
                       ker.data()[size_t(((f * C + c) * k + i) * k + j)];
              }
          EXPECT_NEAR(out.data()[size_t((f * Ho + ho) * Wo + wo)], acc, 1e-12);
        }
  }
}

TEST(Forward, ShapeMismatchNamesBothShapes) {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({4}, {1, 2, 3, 4});
  try {
    add(a, b);
    FAIL() << "expected TensorError";
  } catch (const TensorError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[4]"), std::string::npos);
  }
}

TEST(Forward, LogClampNeverNaN) {
  Tensor x({3}, {0.0, -1.0, 1.0});
  auto y = log(x);
  for (double v : y.data()) EXPECT_FALSE(std::isnan(v));
}

TEST(Backward, SumGivesOnes) {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, SquareAnalytic) {
  Tensor x({2}, {1, 2}, true);
  sum(mul(x, x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Backward, NonScalarRootThrows) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(mul(x, x).backward(), TensorError);
}

// backward twice without zero_grad doubles grads (exact in 64-bit).
TEST(Backward, AccumulationIsAdditive) {
  Rng rng(3);
  Tensor x = random_tensor({4}, rng);
  x.set_requires_grad(true);
  auto f = [&] { return sum(mul(sigmoid(x), x)); };
  f().backward();
  auto once = x.grad();
  f().backward();
  for (size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * once[i]);
}

TEST(Backward, BitwiseReproducibleForward) {
  Rng a(11), b(11);
  Tensor xa = random_tensor({3, 3}, a), xb = random_tensor({3, 3}, b);
  auto ya = softmax(matmul(xa, xa));
  auto yb = softmax(matmul(xb, xb));
  EXPECT_EQ(ya.data(), yb.data());
}

TEST(GradCheck, LinearIsExact) {
  Rng rng(5);
  auto rep = grad_check([](const Tensor& x) { return sum(x); }, random_tensor({5}, rng));
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.max_rel_err, 1e-9);
}

TEST(GradCheck, SigmoidSum) {
  Rng rng(6);
  auto rep = grad_check([](const Tensor& x) { return sum(sigmoid(x)); },
                        random_tensor({7}, rng));
  EXPECT_TRUE(rep.pass) << rep.to_string();
}

TEST(GradCheck, Atan2AwayFromOrigin) {
  Rng rng(8);
  Tensor y = random_tensor({5}, rng, 0.5, 2.0);
  Tensor x = random_tensor({5}, rng, 0.5, 2.0);
  auto rep = grad_check(
      [](const std::vector<Tensor>& in) { return sum(atan2(in[0], in[1])); }, {y, x});
  EXPECT_TRUE(rep.pass) << rep.to_string();
}

TEST(GradCheck, NonDeterministicFnThrows) {
  int calls = 0;
  auto f = [&calls](const std::vector<Tensor>& in) {
    return mul(sum(in[0]), 1.0 + 0.1 * calls++);
  };
  Rng rng(9);
  std::vector<Tensor> in{random_tensor({3}, rng)};
  EXPECT_THROW(grad_check(f, in), TensorError);
}

// The main property: every op in the required set passes grad_check at tol
// 1e-4 over many random shapes/seeds in 64-bit.
TEST(GradCheck, AllOpsManySeeds) {
  const int kSeedsPerOp = 100;
  struct Case {
    const char* name;
    TensorFn fn;
    std::function<std::vector<Tensor>(Rng&)> make;
  };
  auto vec = [](Shape s) {
    return [s](Rng& rng) {
      std::vector<double> d(size_t(numel_of(s)));
      for (auto& v : d) v = rng.uniform(-2.0, 2.0);
      return std::vector<Tensor>{Tensor(s, d)};
    };
  };
  auto vec2 = [](Shape a, Shape b, double lo = -2.0, double hi = 2.0) {
    return [a, b, lo, hi](Rng& rng) {
      std::vector<Tensor> out;
      for (const Shape& s : {a, b}) {
        std::vector<double> d(size_t(numel_of(s)));
        for (auto& v : d) v = rng.uniform(lo, hi);
        out.emplace_back(s, d);
      }
      return out;
    };
  };
  std::vector<Case> cases = {
      {"add", [](const std::vector<Tensor>& x) { return sum(add(x[0], x[1])); },
       vec2({3, 4}, {4})},
      {"sub", [](const std::vector<Tensor>& x) { return sum(sub(x[0], x[1])); },
       vec2({2, 3}, {2, 1})},
      {"mul", [](const std::vector<Tensor>& x) { return sum(mul(x[0], x[1])); },
       vec2({3, 4}, {3, 4})},
      {"mul_scalar", [](const std::vector<Tensor>& x) { return sum(mul(x[0], 1.7)); },
       vec({5})},
      {"matmul", [](const std::vector<Tensor>& x) { return sum(matmul(x[0], x[1])); },
       vec2({3, 4}, {4, 2})},
      {"conv2d_valid",
       [](const std::vector<Tensor>& x) { return sum(conv2d(x[0], x[1], 1, Padding::Valid)); },
       vec2({1, 2, 6, 6}, {3, 2, 3, 3})},
      {"conv2d_same_s2",
       [](const std::vector<Tensor>& x) { return sum(mul(conv2d(x[0], x[1], 2, Padding::Same),
                                                         conv2d(x[0], x[1], 2, Padding::Same))); },
       vec2({1, 1, 7, 7}, {2, 1, 3, 3})},
      {"relu", [](const std::vector<Tensor>& x) { return sum(mul(relu(x[0]), relu(x[0]))); },
       vec({11})},
      {"sigmoid", [](const std::vector<Tensor>& x) { return sum(sigmoid(x[0])); }, vec({9})},
      {"tanh", [](const std::vector<Tensor>& x) { return sum(tanh(x[0])); }, vec({9})},
      {"exp", [](const std::vector<Tensor>& x) { return sum(exp(x[0])); }, vec({6})},
      {"log", [](const std::vector<Tensor>& x) { return sum(log(x[0])); },
       [](Rng& rng) {
         std::vector<double> d(6);
         for (auto& v : d) v = rng.uniform(0.2, 3.0);
         return std::vector<Tensor>{Tensor({6}, d)};
       }},
      {"sin", [](const std::vector<Tensor>& x) { return sum(sin(x[0])); }, vec({6})},
      {"cos", [](const std::vector<Tensor>& x) { return sum(cos(x[0])); }, vec({6})},
      {"atan2", [](const std::vector<Tensor>& x) { return sum(atan2(x[0], x[1])); },
       vec2({5}, {5}, 0.3, 2.0)},
      {"mean", [](const std::vector<Tensor>& x) { return mean(mul(x[0], x[0])); }, vec({8})},
      {"sum", [](const std::vector<Tensor>& x) { return sum(mul(x[0], x[0])); }, vec({8})},
      {"l2_norm", [](const std::vector<Tensor>& x) { return l2_norm(x[0]); },
       vec2({7}, {1}, 0.5, 2.0)},
      {"softmax",
       [](const std::vector<Tensor>& x) { return sum(mul(softmax(x[0]), x[1])); },
       vec2({2, 5}, {2, 5})},
      {"bce_with_logits",
       [](const std::vector<Tensor>& x) {
         Tensor t({4}, {1, 0, 1, 0});
         return binary_cross_entropy_with_logits(x[0], t);
       },
       vec({4})},
      {"max_pool2d",
       [](const std::vector<Tensor>& x) { return sum(mul(max_pool2d(x[0], 2), max_pool2d(x[0], 2))); },
       // well-separated values keep the argmax away from FD-straddled ties
       [](Rng& rng) {
         std::vector<double> d(72);
         std::vector<int> perm(72);
         std::iota(perm.begin(), perm.end(), 0);
         for (size_t i = perm.size(); i > 1; --i)
           std::swap(perm[i - 1], perm[size_t(rng.uniform_int(0, int64_t(i) - 1))]);
         for (size_t i = 0; i < d.size(); ++i)
           d[i] = 0.1 * perm[i] + rng.uniform(-0.01, 0.01);
         return std::vector<Tensor>{Tensor({1, 2, 6, 6}, d)};
       }},
      {"global_avg_pool",
       [](const std::vector<Tensor>& x) { return sum(mul(global_avg_pool(x[0]), global_avg_pool(x[0]))); },
       vec({1, 3, 4, 4})},
  };

  for (auto& c : cases) {
    double worst = 0.0;
    for (int s = 0; s < kSeedsPerOp; ++s) {
      Rng rng(derive_seed(0xC0FFEE, uint64_t(s)));
      auto in = c.make(rng);
      auto rep = grad_check(c.fn, in);
      worst = std::max(worst, rep.max_rel_err);
      ASSERT_TRUE(rep.pass) << c.name << " seed " << s << ": " << rep.to_string();
    }
    (void)worst;
  }
}
