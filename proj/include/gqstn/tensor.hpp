#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace gqstn {

using Shape = std::vector<int64_t>;

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

// Guard epsilon for ops with poles (log, atan2, l2_norm at 0).
inline constexpr double kPoleEps = 1e-12;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded op. The graph is the implicit DAG formed by parent links;
// backward() topologically sorts it from the root and visits each node once.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on demand, same length as data
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  // Propagates this->grad into parents' grads (accumulating with +=).
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return int64_t(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (numel_of(shape) != int64_t(data.size()))
      throw TensorError("shape " + shape_str(shape) + " does not match data length " +
                        std::to_string(data.size()));
    n_ = std::make_shared<detail::Node>();
    n_->shape = std::move(shape);
    n_->data = std::move(data);
    n_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(size_t(n), 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(size_t(n), v), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t numel() const { return n_->numel(); }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }

  const std::vector<double>& data() const { return n_->data; }
  std::vector<double>& data() { return n_->data; }
  const std::vector<double>& grad() const {
    n_->ensure_grad();
    return n_->grad;
  }
  void zero_grad() { n_->grad.assign(n_->data.size(), 0.0); }

  double item() const {
    if (numel() != 1) throw TensorError("item() on non-scalar tensor " + shape_str(shape()));
    return n_->data[0];
  }

  detail::NodePtr node() const { return n_; }

  // Reverse-mode backward from a scalar root. Grads accumulate (+=) into
  // every reachable requires_grad tensor; call zero_grad between passes.
  void backward() const {
    if (numel() != 1)
      throw TensorError("backward() requires a scalar root, got " + shape_str(shape()));
    if (!n_->requires_grad) return;
    // Topological order via iterative DFS.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, i] = stack.back();
      if (i < node->parents.size()) {
        detail::Node* p = node->parents[i++].get();
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* node = *it;
      if (node->backward_fn) node->backward_fn(*node);
    }
  }

 private:
  detail::NodePtr n_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::vector<Tensor> parents,
                          std::function<void(Node&)> backward_fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  Tensor out(std::move(shape), std::move(data), rg);
  if (rg) {
    auto n = out.node();
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return out;
}

// ---- broadcasting helpers (numpy rules) ----

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* opname) {
  size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (size_t i = 0; i < n; ++i) {
    int64_t da = i < n - a.size() ? 1 : a[i - (n - a.size())];
    int64_t db = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (da != db && da != 1 && db != 1)
      throw TensorError(std::string(opname) + ": shapes " + shape_str(a) + " and " +
                        shape_str(b) + " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides, with 0 stride on broadcast (size-1) dims against `to`.
inline std::vector<int64_t> broadcast_strides(const Shape& from, const Shape& to) {
  std::vector<int64_t> strides(to.size(), 0);
  int64_t s = 1;
  size_t off = to.size() - from.size();
  for (size_t i = from.size(); i-- > 0;) {
    strides[i + off] = (from[i] == 1 && to[i + off] != 1) ? 0 : s;
    s *= from[i];
  }
  return strides;
}

template <class Fwd, class Bwd>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* opname, Fwd fwd,
                        Bwd bwd) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), opname);
  int64_t n = numel_of(out_shape);
  auto sa = broadcast_strides(a.shape(), out_shape);
  auto sb = broadcast_strides(b.shape(), out_shape);
  size_t nd = out_shape.size();

  std::vector<double> out(static_cast<size_t>(n));
  std::vector<int64_t> idx(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t i = 0; i < n; ++i) {
    out[size_t(i)] = fwd(a.data()[size_t(ia)], b.data()[size_t(ib)]);
    for (size_t d = nd; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out_shape[d]) break;
      idx[d] = 0;
      ia -= sa[d] * out_shape[d];
      ib -= sb[d] * out_shape[d];
    }
  }
  Tensor an = a, bn = b;
  return make_result(
      out_shape, std::move(out), {a, b},
      [an, bn, out_shape, sa, sb, bwd](Node& node) {
        auto pa = an.node();
        auto pb = bn.node();
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        size_t nd = out_shape.size();
        std::vector<int64_t> idx(nd, 0);
        int64_t ia = 0, ib = 0;
        int64_t n = node.numel();
        for (int64_t i = 0; i < n; ++i) {
          double g = node.grad[size_t(i)];
          double av = pa->data[size_t(ia)], bv = pb->data[size_t(ib)];
          auto [ga, gb] = bwd(av, bv);
          if (pa->requires_grad) pa->grad[size_t(ia)] += g * ga;
          if (pb->requires_grad) pb->grad[size_t(ib)] += g * gb;
          for (size_t d = nd; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out_shape[d]) break;
            idx[d] = 0;
            ia -= sa[d] * out_shape[d];
            ib -= sb[d] * out_shape[d];
          }
        }
      });
}

template <class Fwd, class Dfn>
Tensor unary_op(const Tensor& x, Fwd fwd, Dfn dfn) {
  std::vector<double> out(x.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
  Tensor xn = x;
  return make_result(x.shape(), std::move(out), {x}, [xn, dfn](Node& node) {
    auto p = xn.node();
    p->ensure_grad();
    for (size_t i = 0; i < node.grad.size(); ++i)
      p->grad[i] += node.grad[i] * dfn(p->data[i], node.data[i]);
  });
}

}  // namespace detail

// ---- elementwise ----

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

inline Tensor add(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor sub(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor mul(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor neg(const Tensor& a) { return mul(a, -1.0); }

inline Tensor relu(const Tensor& x) {
  return detail::unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_op(
      x,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_op(x, [](double v) { return std::tanh(v); },
                          [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary_op(x, [](double v) { return std::exp(v); },
                          [](double, double y) { return y; });
}

// log clamps its argument at kPoleEps; below the clamp the function is
// constant so the gradient there is zero.
inline Tensor log(const Tensor& x) {
  return detail::unary_op(
      x, [](double v) { return std::log(std::max(v, kPoleEps)); },
      [](double v, double) { return v > kPoleEps ? 1.0 / v : 0.0; });
}

inline Tensor sin(const Tensor& x) {
  return detail::unary_op(x, [](double v) { return std::sin(v); },
                          [](double v, double) { return std::cos(v); });
}

inline Tensor cos(const Tensor& x) {
  return detail::unary_op(x, [](double v) { return std::cos(v); },
                          [](double v, double) { return -std::sin(v); });
}

// atan2(y, x), elementwise with broadcasting. Guarded at the origin:
// |x|,|y| < kPoleEps -> value 0 with zero gradients.
inline Tensor atan2(const Tensor& y, const Tensor& x) {
  return detail::broadcast_binary(
      y, x, "atan2",
      [](double yv, double xv) {
        if (std::abs(yv) < kPoleEps && std::abs(xv) < kPoleEps) return 0.0;
        return std::atan2(yv, xv);
      },
      [](double yv, double xv) {
        double d = yv * yv + xv * xv;
        if (d < kPoleEps * kPoleEps) return std::pair<double, double>{0.0, 0.0};
        return std::pair<double, double>{xv / d, -yv / d};
      });
}

// ---- reductions ----

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor xn = x;
  return detail::make_result(Shape{}, {s}, {x}, [xn](detail::Node& node) {
    auto p = xn.node();
    p->ensure_grad();
    double g = node.grad[0];
    for (auto& gv : p->grad) gv += g;
  });
}

inline Tensor mean(const Tensor& x) {
  double inv = 1.0 / double(x.numel());
  return mul(sum(x), inv);
}

inline Tensor l2_norm(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  double r = std::sqrt(s);
  Tensor xn = x;
  return detail::make_result(Shape{}, {r}, {x}, [xn, r](detail::Node& node) {
    auto p = xn.node();
    p->ensure_grad();
    double g = node.grad[0];
    double inv = r > kPoleEps ? 1.0 / r : 0.0;
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g * p->data[i] * inv;
  });
}

// softmax over the last dimension.
inline Tensor softmax(const Tensor& x) {
  if (x.shape().empty()) throw TensorError("softmax: rank-0 tensor");
  int64_t cols = x.shape().back();
  int64_t rows = x.numel() / cols;
  std::vector<double> out(x.data().size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (int64_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (int64_t c = 0; c < cols; ++c) o[c] /= z;
  }
  Tensor xn = x;
  return detail::make_result(
      x.shape(), std::move(out), {x}, [xn, rows, cols](detail::Node& node) {
        auto p = xn.node();
        p->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
          const double* y = node.data.data() + r * cols;
          const double* gy = node.grad.data() + r * cols;
          double dot = 0.0;
          for (int64_t c = 0; c < cols; ++c) dot += y[c] * gy[c];
          double* gx = p->grad.data() + r * cols;
          for (int64_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
        }
      });
}

// Stable binary cross-entropy with logits; elementwise mean over the tensor.
inline Tensor binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    throw TensorError("bce_with_logits: logits " + shape_str(logits.shape()) +
                      " vs targets " + shape_str(targets.shape()));
  int64_t n = logits.numel();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double x = logits.data()[size_t(i)], t = targets.data()[size_t(i)];
    loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  loss /= double(n);
  Tensor ln = logits, tn = targets;
  return detail::make_result(Shape{}, {loss}, {logits, targets}, [ln, tn, n](detail::Node& node) {
    auto p = ln.node();
    auto pt = tn.node();
    double g = node.grad[0] / double(n);
    if (p->requires_grad) {
      p->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        double x = p->data[size_t(i)], t = pt->data[size_t(i)];
        double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        p->grad[size_t(i)] += g * (s - t);
      }
    }
    if (pt->requires_grad) {
      pt->ensure_grad();
      for (int64_t i = 0; i < n; ++i) pt->grad[size_t(i)] += g * (-p->data[size_t(i)]);
    }
  });
}

// ---- shape ops ----

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw TensorError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                      " changes element count");
  Tensor xn = x;
  return detail::make_result(std::move(shape), x.data(), {x}, [xn](detail::Node& node) {
    auto p = xn.node();
    p->ensure_grad();
    for (size_t i = 0; i < node.grad.size(); ++i) p->grad[i] += node.grad[i];
  });
}

// Concatenate along dim 0.
inline Tensor concat0(const Tensor& a, const Tensor& b) {
  Shape sa = a.shape(), sb = b.shape();
  if (sa.size() != sb.size() || sa.empty())
    throw TensorError("concat0: ranks differ " + shape_str(sa) + " vs " + shape_str(sb));
  for (size_t i = 1; i < sa.size(); ++i)
    if (sa[i] != sb[i])
      throw TensorError("concat0: trailing dims differ " + shape_str(sa) + " vs " + shape_str(sb));
  Shape out_shape = sa;
  out_shape[0] += sb[0];
  std::vector<double> out;
  out.reserve(a.data().size() + b.data().size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  Tensor an = a, bn = b;
  return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                             [an, bn](detail::Node& node) {
                               auto pa = an.node();
                               auto pb = bn.node();
                               size_t na = pa->data.size();
                               if (pa->requires_grad) {
                                 pa->ensure_grad();
                                 for (size_t i = 0; i < na; ++i) pa->grad[i] += node.grad[i];
                               }
                               if (pb->requires_grad) {
                                 pb->ensure_grad();
                                 for (size_t i = 0; i < pb->data.size(); ++i)
                                   pb->grad[i] += node.grad[na + i];
                               }
                             });
}

// ---- linear algebra ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw TensorError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(size_t(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      double av = a.data()[size_t(i * k + p)];
      const double* brow = b.data().data() + p * n;
      double* orow = out.data() + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Tensor an = a, bn = b;
  return detail::make_result(
      Shape{m, n}, std::move(out), {a, b}, [an, bn, m, k, n](detail::Node& node) {
        auto pa = an.node();
        auto pb = bn.node();
        if (pa->requires_grad) {
          pa->ensure_grad();  // dA = dC * B^T
          for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
              double s = 0.0;
              const double* grow = node.grad.data() + i * n;
              const double* brow = pb->data.data() + p * n;
              for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
              pa->grad[size_t(i * k + p)] += s;
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();  // dB = A^T * dC
          for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
              double av = pa->data[size_t(i * k + p)];
              const double* grow = node.grad.data() + i * n;
              double* gbrow = pb->grad.data() + p * n;
              for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
      });
}

// ---- convolution / pooling ----

enum class Padding { Valid, Same };

namespace detail {
inline void conv_out_size(int64_t in, int64_t k, int64_t stride, Padding pad, int64_t& out,
                          int64_t& pad_lo) {
  if (pad == Padding::Valid) {
    out = (in - k) / stride + 1;
    pad_lo = 0;
  } else {
    out = (in + stride - 1) / stride;
    int64_t total = std::max<int64_t>((out - 1) * stride + k - in, 0);
    pad_lo = total / 2;
  }
}
}  // namespace detail

// input [N,Cin,H,W], weight [Cout,Cin,kh,kw] -> [N,Cout,Ho,Wo].
inline Tensor conv2d(const Tensor& input, const Tensor& weight, int64_t stride = 1,
                     Padding pad = Padding::Valid) {
  if (input.shape().size() != 4 || weight.shape().size() != 4 ||
      input.shape()[1] != weight.shape()[1])
    throw TensorError("conv2d: incompatible shapes " + shape_str(input.shape()) + " and " +
                      shape_str(weight.shape()));
  int64_t N = input.shape()[0], C = input.shape()[1], H = input.shape()[2], W = input.shape()[3];
  int64_t F = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
  int64_t Ho, Wo, ph, pw;
  detail::conv_out_size(H, kh, stride, pad, Ho, ph);
  detail::conv_out_size(W, kw, stride, pad, Wo, pw);
  if (Ho < 1 || Wo < 1)
    throw TensorError("conv2d: kernel " + shape_str(weight.shape()) + " larger than input " +
                      shape_str(input.shape()));

  std::vector<double> out(size_t(N * F * Ho * Wo), 0.0);
  const double* in = input.data().data();
  const double* w = weight.data().data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t ho = 0; ho < Ho; ++ho)
        for (int64_t wo = 0; wo < Wo; ++wo) {
          double acc = 0.0;
          int64_t hi0 = ho * stride - ph, wi0 = wo * stride - pw;
          for (int64_t c = 0; c < C; ++c) {
            const double* inc = in + ((n * C + c) * H) * W;
            const double* wc = w + ((f * C + c) * kh) * kw;
            for (int64_t i = 0; i < kh; ++i) {
              int64_t hi = hi0 + i;
              if (hi < 0 || hi >= H) continue;
              const double* inr = inc + hi * W;
              const double* wr = wc + i * kw;
              for (int64_t j = 0; j < kw; ++j) {
                int64_t wi = wi0 + j;
                if (wi < 0 || wi >= W) continue;
                acc += inr[wi] * wr[j];
              }
            }
          }
          out[size_t(((n * F + f) * Ho + ho) * Wo + wo)] = acc;
        }

  Tensor in_t = input, w_t = weight;
  return detail::make_result(
      Shape{N, F, Ho, Wo}, std::move(out), {input, weight},
      [in_t, w_t, N, C, H, W, F, kh, kw, Ho, Wo, ph, pw, stride](detail::Node& node) {
        auto pi = in_t.node();
        auto pw_ = w_t.node();
        bool gi = pi->requires_grad, gw = pw_->requires_grad;
        if (gi) pi->ensure_grad();
        if (gw) pw_->ensure_grad();
        const double* in = pi->data.data();
        const double* w = pw_->data.data();
        for (int64_t n = 0; n < N; ++n)
          for (int64_t f = 0; f < F; ++f)
            for (int64_t ho = 0; ho < Ho; ++ho)
              for (int64_t wo = 0; wo < Wo; ++wo) {
                double g = node.grad[size_t(((n * F + f) * Ho + ho) * Wo + wo)];
                if (g == 0.0) continue;
                int64_t hi0 = ho * stride - ph, wi0 = wo * stride - pw;
                for (int64_t c = 0; c < C; ++c) {
                  int64_t in_off = ((n * C + c) * H) * W;
                  int64_t w_off = ((f * C + c) * kh) * kw;
                  for (int64_t i = 0; i < kh; ++i) {
                    int64_t hi = hi0 + i;
                    if (hi < 0 || hi >= H) continue;
                    for (int64_t j = 0; j < kw; ++j) {
                      int64_t wi = wi0 + j;
                      if (wi < 0 || wi >= W) continue;
                      if (gi) pi->grad[size_t(in_off + hi * W + wi)] += g * w[size_t(w_off + i * kw + j)];
                      if (gw) pw_->grad[size_t(w_off + i * kw + j)] += g * in[size_t(in_off + hi * W + wi)];
                    }
                  }
                }
              }
      });
}

// input [N,C,H,W], square window, stride == window (non-overlapping default) or given.
inline Tensor max_pool2d(const Tensor& input, int64_t k, int64_t stride = 0) {
  if (stride == 0) stride = k;
  if (input.shape().size() != 4)
    throw TensorError("max_pool2d: expected 4D input, got " + shape_str(input.shape()));
  int64_t N = input.shape()[0], C = input.shape()[1], H = input.shape()[2], W = input.shape()[3];
  int64_t Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;
  if (Ho < 1 || Wo < 1)
    throw TensorError("max_pool2d: window larger than input " + shape_str(input.shape()));
  std::vector<double> out(size_t(N * C * Ho * Wo));
  auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
  const double* in = input.data().data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t ho = 0; ho < Ho; ++ho)
        for (int64_t wo = 0; wo < Wo; ++wo) {
          int64_t best = -1;
          double bv = -std::numeric_limits<double>::infinity();
          for (int64_t i = 0; i < k; ++i)
            for (int64_t j = 0; j < k; ++j) {
              int64_t idx = ((n * C + c) * H + ho * stride + i) * W + wo * stride + j;
              if (in[size_t(idx)] > bv) {
                bv = in[size_t(idx)];
                best = idx;
              }
            }
          int64_t o = ((n * C + c) * Ho + ho) * Wo + wo;
          out[size_t(o)] = bv;
          (*argmax)[size_t(o)] = best;
        }
  Tensor in_t = input;
  return detail::make_result(Shape{N, C, Ho, Wo}, std::move(out), {input},
                             [in_t, argmax](detail::Node& node) {
                               auto p = in_t.node();
                               p->ensure_grad();
                               for (size_t i = 0; i < node.grad.size(); ++i)
                                 p->grad[size_t((*argmax)[i])] += node.grad[i];
                             });
}

// Global average pool over H,W of [N,C,H,W] -> [N,C].
inline Tensor global_avg_pool(const Tensor& input) {
  if (input.shape().size() != 4)
    throw TensorError("global_avg_pool: expected 4D input, got " + shape_str(input.shape()));
  int64_t N = input.shape()[0], C = input.shape()[1], H = input.shape()[2], W = input.shape()[3];
  int64_t hw = H * W;
  std::vector<double> out(size_t(N * C), 0.0);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    const double* p = input.data().data() + nc * hw;
    for (int64_t i = 0; i < hw; ++i) s += p[i];
    out[size_t(nc)] = s / double(hw);
  }
  Tensor in_t = input;
  return detail::make_result(Shape{N, C}, std::move(out), {input},
                             [in_t, hw](detail::Node& node) {
                               auto p = in_t.node();
                               p->ensure_grad();
                               double inv = 1.0 / double(hw);
                               for (size_t nc = 0; nc < node.grad.size(); ++nc) {
                                 double g = node.grad[nc] * inv;
                                 double* gp = p->grad.data() + int64_t(nc) * hw;
                                 for (int64_t i = 0; i < hw; ++i) gp[i] += g;
                               }
                             });
}

// Extract one scalar element as a rank-0 tensor (differentiable view).
inline Tensor select(const Tensor& x, int64_t flat_index) {
  if (flat_index < 0 || flat_index >= x.numel())
    throw TensorError("select: index out of range");
  Tensor xn = x;
  return detail::make_result(Shape{}, {x.data()[size_t(flat_index)]}, {x},
                             [xn, flat_index](detail::Node& node) {
                               auto p = xn.node();
                               p->ensure_grad();
                               p->grad[size_t(flat_index)] += node.grad[0];
                             });
}

}  // namespace gqstn
