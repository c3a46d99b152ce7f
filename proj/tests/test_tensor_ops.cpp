#include <cmath>
#include <vector>

#include "doctest.h"
#include "t2f/batchnorm.hpp"
#include "t2f/conv.hpp"
#include "t2f/ops.hpp"
#include "t2f/tensor.hpp"

using namespace t2f;

namespace {

// Reference implementations kept deliberately naive and separate from the
// library's GEMM/im2col path, so the two can disagree.

TensorD matmul_oracle(const TensorD& x, const TensorD& w) {
  const std::size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
  TensorD out = TensorD::zeros({n, m});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0;
      for (std::size_t c = 0; c < k; ++c)
        acc += x.at(i * k + c) * w.at(c * m + j);
      o[i * m + j] = acc;
    }
  return out;
}

TensorD conv_oracle(const TensorD& x, const TensorD& k, std::size_t stride,
                    std::size_t pad) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
  TensorD out = TensorD::zeros({n, co, oh, ow});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (std::size_t b = 0; b < ci; ++b)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                    ix >= static_cast<std::ptrdiff_t>(w))
                  continue;
                acc += x.at(((i * ci + b) * h + iy) * w + ix) *
                       k.at(((c * ci + b) * kh + ky) * kw + kx);
              }
          o[((i * co + c) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

// Direct scatter formulation of the transposed convolution.
TensorD deconv_oracle(const TensorD& x, const TensorD& k, std::size_t stride,
                      std::size_t pad) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h - 1) * stride - 2 * pad + kh;
  const std::size_t ow = (w - 1) * stride - 2 * pad + kw;
  TensorD out = TensorD::zeros({n, co, oh, ow});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < ci; ++a)
      for (std::size_t hy = 0; hy < h; ++hy)
        for (std::size_t hx = 0; hx < w; ++hx) {
          double v = x.at(((i * ci + a) * h + hy) * w + hx);
          for (std::size_t b = 0; b < co; ++b)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(hy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(hx * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(oh) || ox < 0 ||
                    ox >= static_cast<std::ptrdiff_t>(ow))
                  continue;
                o[((i * co + b) * oh + oy) * ow + ox] +=
                    v * k.at(((a * co + b) * kh + ky) * kw + kx);
              }
        }
  return out;
}

double dot_all(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
  return s;
}

void check_close(const TensorD& got, const TensorD& want, double tol) {
  REQUIRE(got.shape() == want.shape());
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    double d = std::abs(got.at(i) - want.at(i));
    double scale = std::max(1.0, std::abs(want.at(i)));
    worst = std::max(worst, d / scale);
  }
  CHECK(worst < tol);
}

}  // namespace

TEST_SUITE("tensor_ops") {

TEST_CASE("from_data rejects size and non-finite violations") {
  CHECK_THROWS_AS(TensorD::from_data({2, 2}, {1, 2, 3}), ContractError);
  CHECK_THROWS_AS(TensorD::from_data({2}, {1.0, std::nan("")}), ContractError);
  CHECK_THROWS_AS(TensorD::from_data({1}, {INFINITY}), ContractError);
  auto t = TensorD::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(t.size() == 4);
  CHECK(t.at(3) == 4.0);
}

TEST_CASE("item requires a single element") {
  CHECK(TensorD::scalar(7.5).item() == 7.5);
  CHECK_THROWS_AS(TensorD::zeros({2}).item(), ContractError);
}

TEST_CASE("affine matches the triple-loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = TensorD::randn({3, 4}, rng);
    auto w = TensorD::randn({4, 5}, rng);
    auto b = TensorD::randn({5}, rng);
    auto got = affine<double>(nullptr, x, w, b);
    auto want = matmul_oracle(x, w);
    auto wd = want.mutable_data();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) wd[i * 5 + j] += b.at(j);
    check_close(got, want, 1e-12);
  }
}

TEST_CASE("affine reports both shapes on mismatch") {
  auto x = TensorD::zeros({2, 3});
  auto w = TensorD::zeros({4, 5});
  auto b = TensorD::zeros({5});
  try {
    affine<double>(nullptr, x, w, b);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
}

TEST_CASE("conv2d matches the six-loop oracle") {
  Rng rng(22);
  struct Case {
    std::size_t n, ci, h, w, co, k, stride, pad;
  };
  for (Case c : {Case{2, 3, 5, 5, 4, 3, 2, 1}, Case{1, 2, 8, 8, 3, 4, 2, 1},
                 Case{2, 1, 7, 9, 2, 3, 1, 0}, Case{1, 4, 6, 6, 2, 4, 3, 2}}) {
    auto x = TensorD::randn({c.n, c.ci, c.h, c.w}, rng);
    auto k = TensorD::randn({c.co, c.ci, c.k, c.k}, rng);
    auto got = conv2d<double>(nullptr, x, k, c.stride, c.pad);
    auto want = conv_oracle(x, k, c.stride, c.pad);
    check_close(got, want, 1e-12);
  }
}

TEST_CASE("conv2d output geometry") {
  auto x = TensorD::zeros({1, 3, 64, 64});
  auto k = TensorD::zeros({8, 3, 4, 4});
  auto out = conv2d<double>(nullptr, x, k, 2, 1);
  CHECK(out.shape() == Shape{1, 8, 32, 32});
}

TEST_CASE("conv2d rejects channel mismatch and oversized kernels") {
  auto x = TensorD::zeros({1, 3, 8, 8});
  CHECK_THROWS_AS(
      conv2d<double>(nullptr, x, TensorD::zeros({4, 2, 3, 3}), 1, 0),
      ContractError);
  CHECK_THROWS_AS(
      conv2d<double>(nullptr, x, TensorD::zeros({4, 3, 9, 9}), 1, 0),
      ContractError);
  CHECK_THROWS_AS(
      conv2d<double>(nullptr, x, TensorD::zeros({4, 3, 3, 3}), 0, 0),
      ContractError);
}

TEST_CASE("deconv2d matches the scatter oracle") {
  Rng rng(33);
  struct Case {
    std::size_t n, ci, h, w, co, k, stride, pad;
  };
  for (Case c : {Case{2, 3, 4, 4, 2, 4, 2, 1}, Case{1, 2, 5, 5, 3, 3, 1, 0},
                 Case{1, 4, 3, 3, 2, 4, 2, 1}, Case{2, 2, 6, 4, 1, 5, 3, 2}}) {
    auto x = TensorD::randn({c.n, c.ci, c.h, c.w}, rng);
    auto k = TensorD::randn({c.ci, c.co, c.k, c.k}, rng);
    auto got = deconv2d<double>(nullptr, x, k, c.stride, c.pad);
    auto want = deconv_oracle(x, k, c.stride, c.pad);
    check_close(got, want, 1e-12);
  }
}

TEST_CASE("deconv2d identity and doubling geometry") {
  auto x = TensorD::from_data({1, 1, 1, 1}, {3.25});
  auto k = TensorD::from_data({1, 1, 1, 1}, {1.0});
  auto out = deconv2d<double>(nullptr, x, k, 1, 0);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.at(0) == 3.25);

  auto x4 = TensorD::zeros({2, 8, 4, 4});
  auto k4 = TensorD::zeros({8, 4, 4, 4});
  auto up = deconv2d<double>(nullptr, x4, k4, 2, 1);
  CHECK(up.shape() == Shape{2, 4, 8, 8});
  auto up2 = deconv2d<double>(nullptr, up, TensorD::zeros({4, 2, 4, 4}), 2, 1);
  CHECK(up2.shape() == Shape{2, 2, 16, 16});
}

TEST_CASE("conv and deconv are adjoint under a shared kernel") {
  Rng rng(44);
  struct Case {
    std::size_t n, ci, h, w, co, k, stride, pad;
  };
  for (Case c : {Case{2, 3, 6, 6, 4, 4, 2, 1}, Case{1, 2, 9, 7, 3, 3, 2, 0},
                 Case{3, 1, 5, 5, 2, 3, 1, 1}, Case{1, 5, 8, 8, 2, 4, 4, 2}}) {
    auto x = TensorD::randn({c.n, c.ci, c.h, c.w}, rng);
    auto k = TensorD::randn({c.co, c.ci, c.k, c.k}, rng);
    auto cx = conv2d<double>(nullptr, x, k, c.stride, c.pad);
    auto y = TensorD::randn(cx.shape(), rng);
    auto dy = deconv2d<double>(nullptr, y, k, c.stride, c.pad);
    REQUIRE(dy.shape() == x.shape());
    double lhs = dot_all(cx, y);
    double rhs = dot_all(x, dy);
    CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)) < 1e-10);
  }
}

TEST_CASE("batchnorm train mode normalizes each channel") {
  Rng rng(55);
  auto x = TensorD::randn({4, 3, 5, 5}, rng, 2.5, 1.0);
  auto gamma = TensorD::full({3}, 1.0);
  auto beta = TensorD::zeros({3});
  RunningStats<double> stats(3);
  auto y = batchnorm<double>(nullptr, x, gamma, beta, stats, BnMode::train);
  const std::size_t m = 4 * 5 * 5;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 25; ++j) mean += y.at((i * 3 + c) * 25 + j);
    mean /= m;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 25; ++j) {
        double d = y.at((i * 3 + c) * 25 + j) - mean;
        var += d * d;
      }
    var /= m;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("batchnorm running stats blend with momentum 0.9") {
  auto x = TensorD::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  auto gamma = TensorD::full({1}, 1.0);
  auto beta = TensorD::zeros({1});
  RunningStats<double> stats(1);
  batchnorm<double>(nullptr, x, gamma, beta, stats, BnMode::train);
  // batch mean 2.5, biased variance 1.25; running starts at (0, 1)
  CHECK(stats.mean[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(stats.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.25).epsilon(1e-12));
}

TEST_CASE("batchnorm infer mode uses running stats only") {
  auto x = TensorD::from_data({1, 1, 1, 2}, {10.0, 20.0});
  auto gamma = TensorD::full({1}, 2.0);
  auto beta = TensorD::full({1}, 1.0);
  RunningStats<double> stats(1);
  stats.mean[0] = 10.0;
  stats.var[0] = 4.0;
  auto y = batchnorm<double>(nullptr, x, gamma, beta, stats, BnMode::infer);
  double invstd = 1.0 / std::sqrt(4.0 + 1e-5);
  CHECK(y.at(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(y.at(1) == doctest::Approx(2.0 * 10.0 * invstd + 1.0).epsilon(1e-9));
  CHECK(stats.mean[0] == 10.0);  // untouched
}

TEST_CASE("batchnorm rejects degenerate train batches") {
  auto x = TensorD::zeros({1, 2, 1, 1});
  auto gamma = TensorD::full({2}, 1.0);
  auto beta = TensorD::zeros({2});
  RunningStats<double> stats(2);
  CHECK_THROWS_AS(
      batchnorm<double>(nullptr, x, gamma, beta, stats, BnMode::train),
      ContractError);
  // Same shape is fine in infer mode.
  CHECK_NOTHROW(
      batchnorm<double>(nullptr, x, gamma, beta, stats, BnMode::infer));
}

TEST_CASE("leaky_relu keeps positives and scales negatives") {
  auto x = TensorD::from_data({4}, {-3.0, -0.5, 0.0, 2.0});
  auto y = leaky_relu<double>(nullptr, x, 0.2);
  CHECK(y.at(0) == doctest::Approx(-0.6));
  CHECK(y.at(1) == doctest::Approx(-0.1));
  CHECK(y.at(2) == 0.0);
  CHECK(y.at(3) == 2.0);
}

TEST_CASE("sigmoid and tanh stay in range") {
  Rng rng(66);
  auto x = TensorD::randn({100}, rng, 5.0);
  auto s = sigmoid<double>(nullptr, x);
  auto t = tanh_op<double>(nullptr, x);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(s.at(i) > 0.0);
    CHECK(s.at(i) < 1.0);
    CHECK(t.at(i) > -1.0);
    CHECK(t.at(i) < 1.0);
  }
  CHECK(sigmoid<double>(nullptr, TensorD::scalar(0.0)).item() == 0.5);
}

TEST_CASE("log_clamped floors its argument") {
  auto x = TensorD::from_data({3}, {0.0, 1e-8, 1.0});
  auto y = log_clamped<double>(nullptr, x, 1e-8);
  CHECK(y.at(0) == doctest::Approx(std::log(1e-8)));
  CHECK(y.at(1) == doctest::Approx(std::log(1e-8)));
  CHECK(y.at(2) == 0.0);
}

TEST_CASE("concat_dim1 joins features and channels") {
  auto a = TensorD::from_data({2, 2}, {1, 2, 3, 4});
  auto b = TensorD::from_data({2, 1}, {5, 6});
  auto c = concat_dim1<double>(nullptr, a, b);
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at(2) == 5.0);
  CHECK(c.at(5) == 6.0);

  auto i1 = TensorD::full({2, 2, 3, 3}, 1.0);
  auto i2 = TensorD::full({2, 1, 3, 3}, 2.0);
  auto cc = concat_dim1<double>(nullptr, i1, i2);
  CHECK(cc.shape() == Shape{2, 3, 3, 3});
  CHECK(cc.at(2 * 9) == 2.0);

  CHECK_THROWS_AS(
      concat_dim1<double>(nullptr, i1, TensorD::zeros({2, 1, 4, 4})),
      ContractError);
}

TEST_CASE("tile_spatial broadcasts and sums back") {
  auto x = TensorD::from_data({1, 2}, {3.0, 4.0});
  auto y = tile_spatial<double>(nullptr, x, 2, 2);
  CHECK(y.shape() == Shape{1, 2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(y.at(i) == 3.0);
    CHECK(y.at(4 + i) == 4.0);
  }
}

TEST_CASE("softmax_rows is a row distribution") {
  Rng rng(77);
  auto z = TensorD::randn({5, 7}, rng, 3.0);
  auto p = softmax_rows(z);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(p.at(i * 7 + j) > 0.0);
      s += p.at(i * 7 + j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

}  // TEST_SUITE
