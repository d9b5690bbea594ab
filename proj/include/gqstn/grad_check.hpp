#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gqstn/tensor.hpp"

namespace gqstn {

struct CheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  int input_index = -1;     // which input held the worst offender
  int64_t element = -1;     // flat index of the worst offender
  double analytic = 0.0;
  double numeric = 0.0;
  std::string to_string() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err << " at input "
       << input_index << " elem " << element << " analytic=" << analytic
       << " numeric=" << numeric;
    return os.str();
  }
};

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Central finite-difference check of reverse-mode gradients.
// rel_err = |analytic - numeric| / max(1, |analytic|, |numeric|).
inline CheckReport grad_check(const TensorFn& f, std::vector<Tensor> inputs,
                              double eps = 1e-5, double tol = 1e-4) {
  for (auto& x : inputs) x.set_requires_grad(true);

  Tensor y0 = f(inputs);
  if (y0.numel() != 1) throw TensorError("grad_check: f must return a scalar");
  Tensor y1 = f(inputs);
  if (y0.item() != y1.item())
    throw TensorError("grad_check: f is non-deterministic on identical input");

  for (auto& x : inputs) x.zero_grad();
  Tensor y = f(inputs);
  y.backward();

  CheckReport rep;
  rep.pass = true;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k];
    const auto analytic = x.grad();
    for (int64_t i = 0; i < x.numel(); ++i) {
      double orig = x.data()[size_t(i)];
      x.data()[size_t(i)] = orig + eps;
      double fp = f(inputs).item();
      x.data()[size_t(i)] = orig - eps;
      double fm = f(inputs).item();
      x.data()[size_t(i)] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[size_t(i)];
      double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.input_index = int(k);
        rep.element = i;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

inline CheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                              double eps = 1e-5, double tol = 1e-4) {
  return grad_check([&f](const std::vector<Tensor>& xs) { return f(xs[0]); },
                    {std::move(x)}, eps, tol);
}

}  // namespace gqstn
