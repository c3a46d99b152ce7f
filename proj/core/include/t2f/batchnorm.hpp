#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "t2f/tape.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

enum class BnMode { train, infer };

// Per-channel running moments, updated in train mode as
//   running = momentum * running + (1 - momentum) * batch
// and consumed verbatim in infer mode. Batch variance is the biased (1/m)
// estimate in both the normalization and the running update.
template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  explicit RunningStats(std::size_t channels = 0)
      : mean(channels, T(0)), var(channels, T(1)) {}
};

// x: [n, c, h, w]; gamma, beta: [c].
template <typename T>
Tensor<T> batchnorm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                    const Tensor<T>& beta, RunningStats<T>& stats, BnMode mode,
                    T eps = T(1e-5), T momentum = T(0.9)) {
  if (x.ndim() != 4)
    throw ContractError("batchnorm: expected [n, c, h, w], got " +
                        shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.size() != c || beta.size() != c || stats.mean.size() != c)
    throw ContractError("batchnorm: channel mismatch for input " +
                        shape_str(x.shape()));
  const std::size_t m = n * hw;
  if (mode == BnMode::train && m < 2)
    throw ContractError("batchnorm: degenerate batch (" + std::to_string(m) +
                        " values per channel) in train mode");

  auto mean = std::make_shared<std::vector<T>>(c);
  auto invstd = std::make_shared<std::vector<T>>(c);
  auto xd = x.data();
  if (mode == BnMode::train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xd.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) sum += p[j];
      }
      T mu = sum / static_cast<T>(m);
      T sq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xd.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) sq += (p[j] - mu) * (p[j] - mu);
      }
      T var = sq / static_cast<T>(m);
      (*mean)[ch] = mu;
      (*invstd)[ch] = T(1) / std::sqrt(var + eps);
      stats.mean[ch] = momentum * stats.mean[ch] + (T(1) - momentum) * mu;
      stats.var[ch] = momentum * stats.var[ch] + (T(1) - momentum) * var;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      (*mean)[ch] = stats.mean[ch];
      (*invstd)[ch] = T(1) / std::sqrt(stats.var[ch] + eps);
    }
  }

  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* p = xd.data() + (i * c + ch) * hw;
      T* q = o + (i * c + ch) * hw;
      T mu = (*mean)[ch], is = (*invstd)[ch], ga = gd[ch], be = bd[ch];
      for (std::size_t j = 0; j < hw; ++j) q[j] = ga * (p[j] - mu) * is + be;
    }

  bool train = mode == BnMode::train;
  return detail::op_result<T>(
      tape, out, {x, gamma, beta},
      [x, gamma, beta, mean, invstd, n, c, hw, train](
          const std::vector<T>& g, GradStore<T>& gs) {
        auto xd = x.data();
        auto gd = gamma.data();
        const T mT = static_cast<T>(n * hw);
        // Per-channel sums of g and g*xhat, shared by all three grads.
        std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T* p = xd.data() + (i * c + ch) * hw;
            const T* gp = g.data() + (i * c + ch) * hw;
            T mu = (*mean)[ch], is = (*invstd)[ch];
            T sg = 0, sgx = 0;
            for (std::size_t j = 0; j < hw; ++j) {
              sg += gp[j];
              sgx += gp[j] * (p[j] - mu) * is;
            }
            sum_g[ch] += sg;
            sum_gx[ch] += sgx;
          }
        if (gamma.requires_grad()) {
          auto& gg = gs.buf(gamma);
          for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
        }
        if (beta.requires_grad()) {
          auto& gb = gs.buf(beta);
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
        }
        if (x.requires_grad()) {
          auto& gx = gs.buf(x);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const T* p = xd.data() + (i * c + ch) * hw;
              const T* gp = g.data() + (i * c + ch) * hw;
              T* q = gx.data() + (i * c + ch) * hw;
              T mu = (*mean)[ch], is = (*invstd)[ch], ga = gd[ch];
              if (train) {
                // d/dx of batch stats folded in: dL/dx =
                // gamma*invstd*(g - mean(g) - xhat*mean(g*xhat))
                T mg = sum_g[ch] / mT, mgx = sum_gx[ch] / mT;
                for (std::size_t j = 0; j < hw; ++j) {
                  T xhat = (p[j] - mu) * is;
                  q[j] += ga * is * (gp[j] - mg - xhat * mgx);
                }
              } else {
                for (std::size_t j = 0; j < hw; ++j) q[j] += ga * is * gp[j];
              }
            }
        }
      });
}

}  // namespace t2f
