#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "t2f/detail/gemm.hpp"
#include "t2f/tape.hpp"
#include "t2f/tensor.hpp"

// Strided cross-correlation and its transpose. Both are lowered to im2col
// plus GEMM; the transposed op reuses the correlation cores with the roles of
// input and output exchanged, which is exactly the adjoint relationship
//   <conv2d(x, K), y> == <x, deconv2d(y, K)>
// for a shared kernel K of shape [co, ci, kh, kw].

namespace t2f {
namespace detail {

struct ConvGeom {
  std::size_t ci, h, w;    // input image
  std::size_t co, kh, kw;  // kernel
  std::size_t stride, pad;
  std::size_t oh, ow;  // output of the strided correlation
};

// cols[ci*kh*kw, oh*ow] from one image, zero-padded out of bounds.
template <typename T>
void im2col(const ConvGeom& g, const T* img, T* cols) {
  const std::size_t L = g.oh * g.ow;
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = cols + ((c * g.kh + ky) * g.kw + kx) * L;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                static_cast<std::ptrdiff_t>(g.pad);
            bool in = iy >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                      ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = in ? img[(c * g.h + iy) * g.w + ix] : T(0);
          }
        }
      }
}

// Scatter-add of a cols buffer back onto one image; adjoint of im2col.
template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* img) {
  const std::size_t L = g.oh * g.ow;
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = cols + ((c * g.kh + ky) * g.kw + kx) * L;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            img[(c * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
}

// out[n, co, oh, ow] += K[co, ci*kh*kw] x cols(x_n)
template <typename T>
void corr_forward(const ConvGeom& g, std::size_t n, const T* x, const T* k,
                  T* out, std::vector<T>* cols_cache) {
  const std::size_t L = g.oh * g.ow, ckk = g.ci * g.kh * g.kw;
  std::vector<T> local;
  std::vector<T>& cols = cols_cache ? *cols_cache : local;
  cols.resize(n * ckk * L);
  for (std::size_t i = 0; i < n; ++i) {
    T* c = cols.data() + i * ckk * L;
    im2col(g, x + i * g.ci * g.h * g.w, c);
    gemm_nn(g.co, ckk, L, k, c, out + i * g.co * L);
  }
}

// gx[n, ci, h, w] += col2im(K^T x gout_n)
template <typename T>
void corr_input_grad(const ConvGeom& g, std::size_t n, const T* gout,
                     const T* k, T* gx) {
  const std::size_t L = g.oh * g.ow, ckk = g.ci * g.kh * g.kw;
  std::vector<T> kt(ckk * g.co);
  for (std::size_t co = 0; co < g.co; ++co)
    for (std::size_t r = 0; r < ckk; ++r) kt[r * g.co + co] = k[co * ckk + r];
  std::vector<T> colsg(ckk * L);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(colsg.begin(), colsg.end(), T(0));
    gemm_nn(ckk, g.co, L, kt.data(), gout + i * g.co * L, colsg.data());
    col2im_add(g, colsg.data(), gx + i * g.ci * g.h * g.w);
  }
}

// gk[co, ci*kh*kw] += sum_n gout_n x cols(x_n)^T. Reuses the forward cols
// when the caller cached them.
template <typename T>
void corr_kernel_grad(const ConvGeom& g, std::size_t n, const T* x,
                      const T* gout, T* gk, const std::vector<T>* cols_cache) {
  const std::size_t L = g.oh * g.ow, ckk = g.ci * g.kh * g.kw;
  std::vector<T> local;
  if (!cols_cache) local.resize(ckk * L);
  for (std::size_t i = 0; i < n; ++i) {
    const T* c;
    if (cols_cache) {
      c = cols_cache->data() + i * ckk * L;
    } else {
      im2col(g, x + i * g.ci * g.h * g.w, local.data());
      c = local.data();
    }
    gemm_nt(g.co, L, ckk, gout + i * g.co * L, c, gk);
  }
}

}  // namespace detail

// x: [n, ci, h, w], kernel: [co, ci, kh, kw]. Output spatial size is
// floor((h + 2*pad - kh) / stride) + 1.
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& kernel,
                 std::size_t stride, std::size_t pad) {
  if (x.ndim() != 4 || kernel.ndim() != 4)
    throw ContractError("conv2d: expected 4-d input and kernel, got " +
                        shape_str(x.shape()) + " and " +
                        shape_str(kernel.shape()));
  if (x.dim(1) != kernel.dim(1))
    throw ContractError("conv2d: input channels " + shape_str(x.shape()) +
                        " do not match kernel " + shape_str(kernel.shape()));
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  if (h + 2 * pad < kh || w + 2 * pad < kw)
    throw ContractError("conv2d: kernel " + shape_str(kernel.shape()) +
                        " larger than padded input " + shape_str(x.shape()));
  detail::ConvGeom g{x.dim(1),      x.dim(2), x.dim(3), kernel.dim(0),
                     kernel.dim(2), kernel.dim(3), stride, pad,
                     (h + 2 * pad - kh) / stride + 1,
                     (w + 2 * pad - kw) / stride + 1};

  auto out = Tensor<T>::zeros({n, g.co, g.oh, g.ow});
  auto cols = std::make_shared<std::vector<T>>();
  detail::corr_forward(g, n, x.data().data(), kernel.data().data(),
                       out.mutable_data().data(), cols.get());
  bool keep_cols = tape && kernel.requires_grad();
  if (!keep_cols) cols->clear();
  return detail::op_result<T>(
      tape, out, {x, kernel},
      [x, kernel, g, n, cols](const std::vector<T>& gout, GradStore<T>& gs) {
        if (kernel.requires_grad())
          detail::corr_kernel_grad(g, n, x.data().data(), gout.data(),
                                   gs.buf(kernel).data(),
                                   cols->empty() ? nullptr : cols.get());
        if (x.requires_grad())
          detail::corr_input_grad(g, n, gout.data(), kernel.data().data(),
                                  gs.buf(x).data());
      });
}

// Transposed convolution. x: [n, ci, h, w], kernel: [ci, co, kh, kw].
// Output spatial size is (h - 1)*stride - 2*pad + kh; with kh=4, stride=2,
// pad=1 each stage exactly doubles the spatial extent.
template <typename T>
Tensor<T> deconv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& kernel,
                   std::size_t stride, std::size_t pad) {
  if (x.ndim() != 4 || kernel.ndim() != 4)
    throw ContractError("deconv2d: expected 4-d input and kernel, got " +
                        shape_str(x.shape()) + " and " +
                        shape_str(kernel.shape()));
  if (x.dim(1) != kernel.dim(0))
    throw ContractError("deconv2d: input channels " + shape_str(x.shape()) +
                        " do not match kernel " + shape_str(kernel.shape()));
  if (stride == 0) throw ContractError("deconv2d: stride must be positive");
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  if ((h - 1) * stride + kh <= 2 * pad || (w - 1) * stride + kw <= 2 * pad)
    throw ContractError("deconv2d: degenerate output for input " +
                        shape_str(x.shape()) + " kernel " +
                        shape_str(kernel.shape()));
  const std::size_t oh = (h - 1) * stride - 2 * pad + kh;
  const std::size_t ow = (w - 1) * stride - 2 * pad + kw;
  // The strided-correlation view: deconv output plays the conv input.
  detail::ConvGeom g{kernel.dim(1), oh, ow, kernel.dim(0), kh, kw,
                     stride,        pad, h,  w};

  auto out = Tensor<T>::zeros({n, g.ci, oh, ow});
  detail::corr_input_grad(g, n, x.data().data(), kernel.data().data(),
                          out.mutable_data().data());
  return detail::op_result<T>(
      tape, out, {x, kernel},
      [x, kernel, g, n](const std::vector<T>& gout, GradStore<T>& gs) {
        if (x.requires_grad())
          detail::corr_forward<T>(g, n, gout.data(), kernel.data().data(),
                                  gs.buf(x).data(), nullptr);
        if (kernel.requires_grad())
          detail::corr_kernel_grad<T>(g, n, gout.data(), x.data().data(),
                                      gs.buf(kernel).data(), nullptr);
      });
}

}  // namespace t2f
