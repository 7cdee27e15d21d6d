#pragma once

#include <functional>
#include <vector>

#include "artkit/tensor.hpp"

namespace artkit::ad {

struct GradCheckOptions {
  double eps = 1e-5;           // central-difference step
  int64_t max_per_tensor = 0;  // 0 = check every element
};

// Compares reverse-mode gradients of the scalar `f()` against central finite
// differences for every listed parameter tensor. Returns the max over checked
// elements of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
//
// f() must rebuild the graph from the current parameter values on every call.
// With max_per_tensor > 0 a deterministic stride subset of each tensor is
// checked instead of every element.
template <typename T>
double grad_check(const std::function<Tensor<T>()>& f,
                  const std::vector<Tensor<T>>& params,
                  GradCheckOptions opt = {}) {
  for (Tensor<T> p : params) {
    auto& g = p.grad();
    std::fill(g.begin(), g.end(), T(0));
  }
  Tensor<T> loss = f();
  backward(loss);
  std::vector<std::vector<T>> ad_grads;
  ad_grads.reserve(params.size());
  for (const auto& p : params) ad_grads.push_back(p.grad());

  double worst = 0.0;
  const double eps = opt.eps;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T> p = params[pi];
    int64_t n = p.numel();
    int64_t stride = 1;
    if (opt.max_per_tensor > 0 && n > opt.max_per_tensor)
      stride = (n + opt.max_per_tensor - 1) / opt.max_per_tensor;
    for (int64_t i = 0; i < n; i += stride) {
      T saved = p.value()[size_t(i)];
      p.value()[size_t(i)] = saved + T(eps);
      double f_plus = double(f().item());
      p.value()[size_t(i)] = saved - T(eps);
      double f_minus = double(f().item());
      p.value()[size_t(i)] = saved;
      double g_fd = (f_plus - f_minus) / (2.0 * eps);
      double g_ad = double(ad_grads[pi][size_t(i)]);
      double denom = std::max(1e-8, std::abs(g_ad) + std::abs(g_fd));
      worst = std::max(worst, std::abs(g_ad - g_fd) / denom);
    }
  }
  return worst;
}

}  // namespace artkit::ad
