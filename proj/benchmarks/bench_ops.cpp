#include <benchmark/benchmark.h>

#include "t2f/batchnorm.hpp"
#include "t2f/conv.hpp"
#include "t2f/detail/gemm.hpp"
#include "t2f/ops.hpp"
#include "t2f/rng.hpp"

namespace {

using t2f::Rng;
using t2f::TensorF;

void bm_gemm_nn(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n), b(n * n), c(n * n);
  Rng rng(1);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    t2f::detail::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(bm_gemm_nn)->Arg(64)->Arg(256)->Arg(512);

void bm_gemm_nt(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n), b(n * n), c(n * n);
  Rng rng(2);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    t2f::detail::gemm_nt(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(bm_gemm_nt)->Arg(64)->Arg(256)->Arg(512);

// Forward shapes from the image pipeline: batch 64 at the 16px scale.
void bm_conv_forward(benchmark::State& state) {
  Rng rng(3);
  auto x = TensorF::randn({64, 32, 8, 8}, rng);
  auto k = TensorF::randn({64, 32, 4, 4}, rng);
  for (auto _ : state) {
    auto y = t2f::conv2d<float>(nullptr, x, k, 2, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(bm_conv_forward);

void bm_deconv_forward(benchmark::State& state) {
  Rng rng(4);
  auto x = TensorF::randn({64, 64, 4, 4}, rng);
  auto k = TensorF::randn({64, 32, 4, 4}, rng);
  for (auto _ : state) {
    auto y = t2f::deconv2d<float>(nullptr, x, k, 2, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(bm_deconv_forward);

void bm_batchnorm_train(benchmark::State& state) {
  Rng rng(5);
  auto x = TensorF::randn({64, 64, 8, 8}, rng);
  auto gamma = TensorF::full({64}, 1.0f);
  auto beta = TensorF::zeros({64});
  t2f::RunningStats<float> stats(64);
  for (auto _ : state) {
    auto y = t2f::batchnorm<float>(nullptr, x, gamma, beta, stats,
                                   t2f::BnMode::train);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(bm_batchnorm_train);

}  // namespace

BENCHMARK_MAIN();
