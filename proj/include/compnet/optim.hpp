#pragma once

#include <cmath>
#include <vector>

#include "compnet/autograd.hpp"

namespace compnet {

/// Adaptive-moment update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) applied
/// independently to the real and imaginary buffers of every parameter.
template <typename T>
struct Adam {
  double lr = 2e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step_count = 0;
  struct Moments {
    CTensor<T> m, v;
  };
  std::vector<Moments> moments;  // aligned with the parameter list

  void init(const std::vector<Parameter<T>*>& params) {
    moments.clear();
    for (auto* p : params)
      moments.push_back({CTensor<T>(p->value.shape), CTensor<T>(p->value.shape)});
    step_count = 0;
  }

  /// One update from the accumulated gradients; grads are then zeroed.
  /// Non-finite gradients abort before touching any parameter.
  void step(const std::vector<Parameter<T>*>& params) {
    check_shape(params.size() == moments.size(), "Adam: call init() first");
    for (auto* p : params)
      if (!p->grad.all_finite())
        throw NumericError("non-finite gradient in parameter " + p->name);
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      Moments& mo = moments[i];
      auto update = [&](std::vector<T>& w, const std::vector<T>& g,
                        std::vector<T>& m, std::vector<T>& v) {
        for (size_t k = 0; k < w.size(); ++k) {
          double gk = g[k];
          double mk = beta1 * m[k] + (1.0 - beta1) * gk;
          double vk = beta2 * v[k] + (1.0 - beta2) * gk * gk;
          m[k] = static_cast<T>(mk);
          v[k] = static_cast<T>(vk);
          w[k] -= static_cast<T>(lr * (mk / bc1) / (std::sqrt(vk / bc2) + eps));
        }
      };
      update(p.value.re, p.grad.re, mo.m.re, mo.v.re);
      update(p.value.im, p.grad.im, mo.m.im, mo.v.im);
      p.zero_grad();
    }
  }
};

}  // namespace compnet
