#pragma once

#include <cstring>
#include <string>

#include "gqstn/rng.hpp"
#include "gqstn/tensor.hpp"

namespace gqstn {

// Small convolutional backbone: stride-2 3x3 conv stages with optional
// residual refinement, then either global average pooling or a flattened
// feature map into one dense head. Pooled features of a translation-
// equivariant conv stack are blind to absolute object position, so the
// localization heads use the flattened variant; the robustness classifier
// keeps pooling (its task is position-invariant by construction).
struct BackboneConfig {
  int64_t input_h = 96, input_w = 96;
  int64_t in_channels = 1;
  std::vector<int64_t> channels = {8, 16, 32, 64};
  bool residual = true;
  bool flatten_head = false;
  int64_t head_dim = 2;

  // Spatial size after the stride-2 stages (Same padding: ceil division).
  std::pair<int64_t, int64_t> feature_hw() const {
    int64_t h = input_h, w = input_w;
    for (size_t s = 0; s < channels.size(); ++s) {
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
    return {h, w};
  }
  int64_t head_in() const {
    auto [h, w] = feature_hw();
    return flatten_head ? channels.back() * h * w : channels.back();
  }

  void validate() const {
    if (channels.size() < 2) throw TensorError("BackboneConfig: need >= 2 conv stages");
    for (int64_t c : channels)
      if (c < 1) throw TensorError("BackboneConfig: zero-channel stage");
    if (head_dim < 1) throw TensorError("BackboneConfig: head_dim must be >= 1");
  }
};

struct ModelParams {
  std::vector<std::pair<std::string, Tensor>> named;

  Tensor& at(const std::string& name) {
    for (auto& [n, t] : named)
      if (n == name) return t;
    throw TensorError("ModelParams: no parameter named " + name);
  }
  const Tensor& at(const std::string& name) const {
    return const_cast<ModelParams*>(this)->at(name);
  }

  int64_t count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [n, t] : named) t.zero_grad();
  }

  void set_requires_grad(bool rg) {
    for (auto& [n, t] : named) t.set_requires_grad(rg);
  }

  // FNV-1a over the raw parameter bytes; used by freeze-invariant tests.
  uint64_t checksum() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, t] : named) {
      for (char c : name) h = (h ^ uint64_t(uint8_t(c))) * 1099511628211ULL;
      for (double v : t.data()) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) h = (h ^ ((bits >> (8 * i)) & 0xff)) * 1099511628211ULL;
      }
    }
    return h;
  }
};

class Backbone {
 public:
  Backbone() = default;

  // He fan-in initialization from a seeded stream; same seed + config gives
  // bitwise identical parameters.
  Backbone(BackboneConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    int64_t cin = cfg_.in_channels;
    for (size_t s = 0; s < cfg_.channels.size(); ++s) {
      int64_t cout = cfg_.channels[s];
      std::string base = "stage" + std::to_string(s);
      add_conv(base + ".conv1", cout, cin, 3, rng);
      if (cfg_.residual) add_conv(base + ".conv2", cout, cout, 3, rng);
      cin = cout;
    }
    add_dense("head", cfg_.head_in(), cfg_.head_dim, rng);
  }

  // image [H,W] (single channel) or [C,H,W] -> [head_dim].
  Tensor forward(const Tensor& image) const {
    Tensor x;
    if (image.shape().size() == 2) {
      if (cfg_.in_channels != 1 || image.shape()[0] != cfg_.input_h ||
          image.shape()[1] != cfg_.input_w)
        throw TensorError("Backbone::forward: image " + shape_str(image.shape()) +
                          " does not match config input " +
                          shape_str({cfg_.in_channels, cfg_.input_h, cfg_.input_w}));
      x = reshape(image, {1, 1, cfg_.input_h, cfg_.input_w});
    } else if (image.shape().size() == 3) {
      if (image.shape()[0] != cfg_.in_channels || image.shape()[1] != cfg_.input_h ||
          image.shape()[2] != cfg_.input_w)
        throw TensorError("Backbone::forward: image " + shape_str(image.shape()) +
                          " does not match config input " +
                          shape_str({cfg_.in_channels, cfg_.input_h, cfg_.input_w}));
      x = reshape(image, {1, cfg_.in_channels, cfg_.input_h, cfg_.input_w});
    } else {
      throw TensorError("Backbone::forward: expected 2D or 3D image, got " +
                        shape_str(image.shape()));
    }
    for (size_t s = 0; s < cfg_.channels.size(); ++s) {
      std::string base = "stage" + std::to_string(s);
      x = relu(add(conv2d(x, params_.at(base + ".conv1.w"), 2, Padding::Same),
                   params_.at(base + ".conv1.b")));
      if (cfg_.residual) {
        Tensor y = add(conv2d(x, params_.at(base + ".conv2.w"), 1, Padding::Same),
                       params_.at(base + ".conv2.b"));
        x = relu(add(x, y));
      }
    }
    Tensor feat = cfg_.flatten_head ? reshape(x, {1, cfg_.head_in()})
                                    : global_avg_pool(x);  // [1, C·H·W] | [1, C]
    Tensor out = add(matmul(feat, params_.at("head.w")), params_.at("head.b"));
    return reshape(out, {cfg_.head_dim});
  }

  int64_t param_count_analytic() const {
    int64_t n = 0, cin = cfg_.in_channels;
    for (int64_t cout : cfg_.channels) {
      n += cout * cin * 9 + cout;
      if (cfg_.residual) n += cout * cout * 9 + cout;
      cin = cout;
    }
    n += cfg_.head_in() * cfg_.head_dim + cfg_.head_dim;
    return n;
  }

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const BackboneConfig& config() const { return cfg_; }

 private:
  void add_conv(const std::string& name, int64_t cout, int64_t cin, int64_t k, Rng& rng) {
    double std = std::sqrt(2.0 / double(cin * k * k));
    std::vector<double> w(size_t(cout * cin * k * k));
    for (auto& v : w) v = rng.normal(0.0, std);
    params_.named.emplace_back(name + ".w", Tensor({cout, cin, k, k}, std::move(w), true));
    params_.named.emplace_back(name + ".b",
                               Tensor::zeros({cout, 1, 1}, true));  // broadcast over H,W
  }

  void add_dense(const std::string& name, int64_t in, int64_t out, Rng& rng) {
    double std = std::sqrt(2.0 / double(in));
    std::vector<double> w(size_t(in * out));
    for (auto& v : w) v = rng.normal(0.0, std);
    params_.named.emplace_back(name + ".w", Tensor({in, out}, std::move(w), true));
    params_.named.emplace_back(name + ".b", Tensor::zeros({1, out}, true));
  }

  BackboneConfig cfg_;
  ModelParams params_;
};

}  // namespace gqstn
