#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "t2f/detail/gemm.hpp"
#include "t2f/tape.hpp"
#include "t2f/tensor.hpp"

// Elementwise, reduction, shape, and dense-linear ops. Every op returns a
// fresh tensor and, when a tape is supplied and any input requires grad,
// registers a pull closure that routes the output gradient to its inputs.

namespace t2f {

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "add");
  auto out = Tensor<T>::zeros(a.shape());
  auto* o = out.mutable_data().data();
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) o[i] = ad[i] + bd[i];
  return detail::op_result<T>(
      tape, out, {a, b}, [a, b](const std::vector<T>& g, GradStore<T>& gs) {
        if (a.requires_grad()) {
          auto& ga = gs.buf(a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
          auto& gb = gs.buf(b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
      });
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "sub");
  auto out = Tensor<T>::zeros(a.shape());
  auto* o = out.mutable_data().data();
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) o[i] = ad[i] - bd[i];
  return detail::op_result<T>(
      tape, out, {a, b}, [a, b](const std::vector<T>& g, GradStore<T>& gs) {
        if (a.requires_grad()) {
          auto& ga = gs.buf(a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
          auto& gb = gs.buf(b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      });
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "mul");
  auto out = Tensor<T>::zeros(a.shape());
  auto* o = out.mutable_data().data();
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) o[i] = ad[i] * bd[i];
  return detail::op_result<T>(
      tape, out, {a, b}, [a, b](const std::vector<T>& g, GradStore<T>& gs) {
        auto ad = a.data(), bd = b.data();
        if (a.requires_grad()) {
          auto& ga = gs.buf(a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
        }
        if (b.requires_grad()) {
          auto& gb = gs.buf(b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
        }
      });
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T c) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) o[i] = xd[i] * c;
  return detail::op_result<T>(
      tape, out, {x}, [x, c](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
      });
}

template <typename T>
Tensor<T> add_scalar(Tape<T>* tape, const Tensor<T>& x, T c) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) o[i] = xd[i] + c;
  return detail::op_result<T>(
      tape, out, {x}, [x](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
}

// 1 - x, the complement used by the discriminator loss terms.
template <typename T>
Tensor<T> one_minus(Tape<T>* tape, const Tensor<T>& x) {
  return add_scalar(tape, scale(tape, x, T(-1)), T(1));
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>* tape, const Tensor<T>& x, T slope) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i)
    o[i] = xd[i] >= T(0) ? xd[i] : slope * xd[i];
  return detail::op_result<T>(
      tape, out, {x}, [x, slope](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto xd = x.data();
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i)
          gx[i] += xd[i] >= T(0) ? g[i] : slope * g[i];
      });
}

template <typename T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) o[i] = std::tanh(xd[i]);
  return detail::op_result<T>(
      tape, out, {x}, [x, out](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto od = out.data();
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i)
          gx[i] += g[i] * (T(1) - od[i] * od[i]);
      });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    T v = xd[i];
    o[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                     : std::exp(v) / (T(1) + std::exp(v));
  }
  return detail::op_result<T>(
      tape, out, {x}, [x, out](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto od = out.data();
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i)
          gx[i] += g[i] * od[i] * (T(1) - od[i]);
      });
}

// log(max(x, floor)). The floor guards the loss terms against log(0); below
// it the gradient is zero, matching the flat clamped region.
template <typename T>
Tensor<T> log_clamped(Tape<T>* tape, const Tensor<T>& x, T floor) {
  auto out = Tensor<T>::zeros(x.shape());
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i)
    o[i] = std::log(std::max(xd[i], floor));
  return detail::op_result<T>(
      tape, out, {x}, [x, floor](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto xd = x.data();
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xd[i] > floor) gx[i] += g[i] / xd[i];
      });
}

template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  auto out = Tensor<T>::scalar(s);
  return detail::op_result<T>(
      tape, out, {x}, [x](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      });
}

template <typename T>
Tensor<T> mean_all(Tape<T>* tape, const Tensor<T>& x) {
  if (x.size() == 0) throw ContractError("mean_all: empty tensor");
  T s = 0;
  for (T v : x.data()) s += v;
  T inv = T(1) / static_cast<T>(x.size());
  auto out = Tensor<T>::scalar(s * inv);
  return detail::op_result<T>(
      tape, out, {x}, [x, inv](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * inv;
      });
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ContractError("reshape: cannot view " + shape_str(x.shape()) +
                        " as " + shape_str(shape));
  auto out = Tensor<T>::from_raw(std::move(shape),
                                 {x.data().begin(), x.data().end()});
  return detail::op_result<T>(
      tape, out, {x}, [x](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
}

// Concatenate along dim 1 (feature columns for 2-d inputs, channels for 4-d).
// All other dims must match.
template <typename T>
Tensor<T> concat_dim1(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 2 || a.ndim() != b.ndim())
    throw ContractError("concat_dim1: need matching ranks >= 2, got " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  for (std::size_t d = 0; d < a.ndim(); ++d)
    if (d != 1 && a.dim(d) != b.dim(d))
      throw ContractError("concat_dim1: shape mismatch " +
                          shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  Shape shape = a.shape();
  shape[1] = a.dim(1) + b.dim(1);
  std::size_t rest = 1;
  for (std::size_t d = 2; d < a.ndim(); ++d) rest *= a.dim(d);
  const std::size_t n = a.dim(0);
  const std::size_t wa = a.dim(1) * rest, wb = b.dim(1) * rest;

  auto out = Tensor<T>::zeros(std::move(shape));
  auto* o = out.mutable_data().data();
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(ad.data() + i * wa, wa, o + i * (wa + wb));
    std::copy_n(bd.data() + i * wb, wb, o + i * (wa + wb) + wa);
  }
  return detail::op_result<T>(
      tape, out, {a, b},
      [a, b, n, wa, wb](const std::vector<T>& g, GradStore<T>& gs) {
        if (a.requires_grad()) {
          auto& ga = gs.buf(a);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < wa; ++j)
              ga[i * wa + j] += g[i * (wa + wb) + j];
        }
        if (b.requires_grad()) {
          auto& gb = gs.buf(b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < wb; ++j)
              gb[i * wb + j] += g[i * (wa + wb) + wa + j];
        }
      });
}

// Broadcast [n, c] to [n, c, h, w]. Used to tile the reduced text embedding
// across the discriminator's spatial grid.
template <typename T>
Tensor<T> tile_spatial(Tape<T>* tape, const Tensor<T>& x, std::size_t h,
                       std::size_t w) {
  if (x.ndim() != 2)
    throw ContractError("tile_spatial: expected [n, c], got " +
                        shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = h * w;
  auto out = Tensor<T>::zeros({n, c, h, w});
  auto* o = out.mutable_data().data();
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::fill_n(o + (i * c + ch) * hw, hw, xd[i * c + ch]);
  return detail::op_result<T>(
      tape, out, {x}, [x, n, c, hw](const std::vector<T>& g, GradStore<T>& gs) {
        if (!x.requires_grad()) return;
        auto& gx = gs.buf(x);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ch = 0; ch < c; ++ch) {
            T s = 0;
            const T* gp = g.data() + (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) s += gp[j];
            gx[i * c + ch] += s;
          }
      });
}

// out[i, j] = sum_k x[i, k] * w[k, j] + b[j]
template <typename T>
Tensor<T> affine(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1 ||
      x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
    throw ContractError("affine: incompatible shapes x=" +
                        shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                        " b=" + shape_str(b.shape()));
  const std::size_t n = x.dim(0), ka = x.dim(1), m = w.dim(1);
  auto out = Tensor<T>::zeros({n, m});
  auto* o = out.mutable_data().data();
  detail::gemm_nn(n, ka, m, x.data().data(), w.data().data(), o);
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] += bd[j];
  return detail::op_result<T>(
      tape, out, {x, w, b},
      [x, w, b, n, ka, m](const std::vector<T>& g, GradStore<T>& gs) {
        if (x.requires_grad()) {
          auto& gx = gs.buf(x);
          detail::gemm_nt(n, m, ka, g.data(), w.data().data(), gx.data());
        }
        if (w.requires_grad()) {
          auto& gw = gs.buf(w);
          // x^T laid out contiguously so the accumulation vectorizes.
          std::vector<T> xt(ka * n);
          auto xd = x.data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < ka; ++k) xt[k * n + i] = xd[i * ka + k];
          detail::gemm_nn(ka, n, m, xt.data(), g.data(), gw.data());
        }
        if (b.requires_grad()) {
          auto& gb = gs.buf(b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
        }
      });
}

// Mean cross-entropy of row-softmax(logits) against integer labels.
// Fused so the backward pass is the numerically benign (p - onehot) / n.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                const std::vector<std::size_t>& labels) {
  if (logits.ndim() != 2 || logits.dim(0) != labels.size())
    throw ContractError("softmax_cross_entropy: logits " +
                        shape_str(logits.shape()) + " vs " +
                        std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto probs = std::make_shared<std::vector<T>>(n * c);
  auto zd = logits.data();
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c)
      throw ContractError("softmax_cross_entropy: label " +
                          std::to_string(labels[i]) + " out of range");
    const T* z = zd.data() + i * c;
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    T lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j)
      (*probs)[i * c + j] = std::exp(z[j] - lse);
    loss += lse - z[labels[i]];
  }
  auto out = Tensor<T>::scalar(loss / static_cast<T>(n));
  return detail::op_result<T>(
      tape, out, {logits},
      [logits, labels, probs, n, c](const std::vector<T>& g,
                                    GradStore<T>& gs) {
        if (!logits.requires_grad()) return;
        auto& gx = gs.buf(logits);
        T w = g[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j)
            gx[i * c + j] +=
                w * ((*probs)[i * c + j] - (j == labels[i] ? T(1) : T(0)));
      });
}

// Forward-only row softmax for prediction paths.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.ndim() != 2)
    throw ContractError("softmax_rows: expected [n, c]");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto out = Tensor<T>::zeros({n, c});
  auto* o = out.mutable_data().data();
  auto zd = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = zd.data() + i * c;
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    for (std::size_t j = 0; j < c; ++j) o[i * c + j] = std::exp(z[j] - mx) / sum;
  }
  return out;
}

}  // namespace t2f
