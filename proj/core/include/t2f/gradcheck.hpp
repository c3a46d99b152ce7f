#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "t2f/tensor.hpp"

namespace t2f {

// Central-difference gradient of a scalar-valued function, evaluated in
// 64-bit regardless of the precision the implementation under test uses.
// f receives a fresh tensor each call and must not retain state across calls.
inline TensorD finite_difference_grad(
    const std::function<double(const TensorD&)>& f, const TensorD& x,
    double h = 1e-5) {
  TensorD grad = TensorD::zeros(x.shape());
  auto gd = grad.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    TensorD xp = x.clone();
    TensorD xm = x.clone();
    xp.mutable_data()[i] += h;
    xm.mutable_data()[i] -= h;
    gd[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return grad;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;

  bool ok(double tol) const { return max_rel_err < tol; }
};

// Worst-case relative disagreement between an analytic gradient and its
// finite-difference estimate. A disagreement smaller than atol in absolute
// terms is treated as exact agreement: central differences at the default
// step cannot resolve below roughly 1e-10, so a sub-atol difference is
// noise, while any real defect shifts the estimate at gradient scale.
inline GradCheckResult compare_grads(std::span<const double> analytic,
                                     std::span<const double> numeric,
                                     double atol = 1e-8) {
  GradCheckResult r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double a = analytic[i], n = numeric[i];
    double diff = std::abs(a - n);
    double err = diff < atol
                     ? 0.0
                     : diff / std::max({std::abs(a), std::abs(n), 1e-12});
    if (err > r.max_rel_err) {
      r.max_rel_err = err;
      r.worst_index = i;
      r.analytic = a;
      r.numeric = n;
    }
  }
  return r;
}

}  // namespace t2f
