#pragma once

#include "gqstn/locnet.hpp"

namespace gqstn {

// Adaptive-moment estimation with decoupled-from-nothing plain L2 penalty
// (the penalty gradient is added to the raw gradient before the update).
struct AdamConfig {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double l2_reg = 1e-7;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  void step(ModelParams& params, double lr) {
    if (m_.empty()) {
      for (const auto& [name, t] : params.named) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
      }
    }
    if (m_.size() != params.named.size())
      throw TensorError("Adam::step: parameter list changed size");
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t p = 0; p < params.named.size(); ++p) {
      Tensor& w = params.named[p].second;
      auto& m = m_[p];
      auto& v = v_[p];
      if (int64_t(m.size()) != w.numel())
        throw TensorError("Adam::step: moment shape mismatch for " + params.named[p].first);
      for (int64_t i = 0; i < w.numel(); ++i) {
        double g = w.grad()[size_t(i)] + cfg_.l2_reg * w.data()[size_t(i)];
        m[size_t(i)] = cfg_.beta1 * m[size_t(i)] + (1.0 - cfg_.beta1) * g;
        v[size_t(i)] = cfg_.beta2 * v[size_t(i)] + (1.0 - cfg_.beta2) * g * g;
        double mh = m[size_t(i)] / bc1, vh = v[size_t(i)] / bc2;
        w.data()[size_t(i)] -= lr * mh / (std::sqrt(vh) + cfg_.eps);
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }
  // exposed for checkpoint/resume plumbing
  std::vector<std::vector<double>>& moments1() { return m_; }
  std::vector<std::vector<double>>& moments2() { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace gqstn
