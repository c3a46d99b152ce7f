#include <cmath>

#include "doctest.h"
#include "t2f/batchnorm.hpp"
#include "t2f/conv.hpp"
#include "t2f/gradcheck.hpp"
#include "t2f/ops.hpp"
#include "t2f/tape.hpp"

using namespace t2f;

namespace {

// Runs the analytic backward for `loss = f(x)` and compares x.grad against
// central differences of the same scalar function.
template <typename F>
void check_grad_against_fd(F f, TensorD x, double tol = 1e-6) {
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = f(&tape, x);
  tape.backward(loss);
  auto numeric = finite_difference_grad(
      [&](const TensorD& probe) { return f(nullptr, probe).item(); }, x);
  auto result = compare_grads(x.grad(), numeric.data());
  INFO("worst index ", result.worst_index, " analytic ", result.analytic,
       " numeric ", result.numeric);
  CHECK(result.max_rel_err < tol);
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("sum_all seeds unit gradients") {
  auto x = TensorD::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum_all(&tape, x);
  CHECK(loss.item() == 21.0);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward twice doubles leaf gradients exactly") {
  Rng rng(1);
  auto x = TensorD::randn({3, 3}, rng);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto y = mul<double>(&tape, x, x);
  auto loss = mean_all(&tape, y);
  tape.backward(loss);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(x.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("tensors without requires_grad stay grad-free") {
  auto x = TensorD::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  auto c = TensorD::from_data({2}, {3.0, 4.0});
  Tape<double> tape;
  auto loss = sum_all(&tape, mul<double>(&tape, x, c));
  tape.backward(loss);
  CHECK(x.has_grad());
  CHECK(!c.has_grad());
  CHECK(x.grad()[0] == 3.0);
  CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("backward rejects non-scalar and foreign losses") {
  auto x = TensorD::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tape<double> tape;
  auto y = mul<double>(&tape, x, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);

  Tape<double> other;
  auto loss = sum_all(&other, y);
  CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("identical replays produce identical gradients") {
  auto run = [] {
    Rng rng(99);
    auto x = TensorD::randn({4, 4}, rng);
    x.set_requires_grad(true);
    Tape<double> tape;
    auto y = sigmoid<double>(&tape, x);
    auto loss = mean_all(&tape, y);
    tape.backward(loss);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  auto a = run();
  auto b = run();
  CHECK(a == b);  // bitwise
}

TEST_CASE("elementwise primitives pass finite differences") {
  Rng rng(7);
  auto x = TensorD::randn({3, 4}, rng);

  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        return sum_all(t, mul<double>(t, v, v));
      },
      x);
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        return mean_all(t, leaky_relu<double>(t, v, 0.2));
      },
      x.clone());
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, v));
      },
      x.clone());
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        return mean_all(t, sigmoid<double>(t, v));
      },
      x.clone());
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        auto s = sigmoid<double>(t, v);
        return mean_all(t, log_clamped<double>(t, s, 1e-8));
      },
      x.clone());
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        auto s = scale<double>(t, v, 0.7);
        return sum_all(t, add_scalar<double>(t, s, 0.3));
      },
      x.clone());
  check_grad_against_fd(
      [](Tape<double>* t, const TensorD& v) {
        auto s = sigmoid<double>(t, v);
        return mean_all(t, one_minus<double>(t, s));
      },
      x.clone());
}

TEST_CASE("affine gradients pass finite differences for every input") {
  Rng rng(8);
  auto x = TensorD::randn({4, 3}, rng);
  auto w = TensorD::randn({3, 5}, rng);
  auto b = TensorD::randn({5}, rng);

  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, affine<double>(t, v, w, b)));
      },
      x.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, affine<double>(t, x, v, b)));
      },
      w.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, affine<double>(t, x, w, v)));
      },
      b.clone());
}

TEST_CASE("conv2d gradients pass finite differences") {
  Rng rng(9);
  auto x = TensorD::randn({2, 2, 5, 5}, rng);
  auto k = TensorD::randn({3, 2, 3, 3}, rng);

  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, conv2d<double>(t, v, k, 2, 1)));
      },
      x.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, conv2d<double>(t, x, v, 2, 1)));
      },
      k.clone());
}

TEST_CASE("deconv2d gradients pass finite differences") {
  Rng rng(10);
  auto x = TensorD::randn({2, 3, 3, 3}, rng);
  auto k = TensorD::randn({3, 2, 4, 4}, rng);

  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, deconv2d<double>(t, v, k, 2, 1)));
      },
      x.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return mean_all(t, tanh_op<double>(t, deconv2d<double>(t, x, v, 2, 1)));
      },
      k.clone());
}

TEST_CASE("batchnorm gradients pass finite differences") {
  Rng rng(11);
  auto x = TensorD::randn({3, 2, 4, 4}, rng, 1.7, 0.4);
  auto gamma = TensorD::uniform({2}, rng, 0.5, 1.5);
  auto beta = TensorD::randn({2}, rng, 0.1);

  auto bn_loss = [&](Tape<double>* t, const TensorD& xx, const TensorD& g,
                     const TensorD& b, BnMode mode) {
    RunningStats<double> stats(2);
    stats.mean = {0.2, -0.4};
    stats.var = {1.5, 0.8};
    auto y = batchnorm<double>(t, xx, g, b, stats, mode);
    return mean_all(t, mul<double>(t, y, y));
  };

  for (BnMode mode : {BnMode::train, BnMode::infer}) {
    check_grad_against_fd(
        [&](Tape<double>* t, const TensorD& v) {
          return bn_loss(t, v, gamma, beta, mode);
        },
        x.clone(), 2e-6);
    check_grad_against_fd(
        [&](Tape<double>* t, const TensorD& v) {
          return bn_loss(t, x, v, beta, mode);
        },
        gamma.clone(), 2e-6);
    check_grad_against_fd(
        [&](Tape<double>* t, const TensorD& v) {
          return bn_loss(t, x, gamma, v, mode);
        },
        beta.clone(), 2e-6);
  }
}

TEST_CASE("concat tile and reshape route gradients to the right slices") {
  Rng rng(12);
  auto a = TensorD::randn({2, 3}, rng);
  auto b = TensorD::randn({2, 2}, rng);

  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        auto c = concat_dim1<double>(t, v, b);
        return mean_all(t, mul<double>(t, c, c));
      },
      a.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        auto c = concat_dim1<double>(t, a, v);
        return mean_all(t, mul<double>(t, c, c));
      },
      b.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        auto y = tile_spatial<double>(t, v, 3, 3);
        return mean_all(t, mul<double>(t, y, y));
      },
      a.clone());
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        auto r = reshape<double>(t, v, {3, 2});
        return mean_all(t, mul<double>(t, r, r));
      },
      a.clone());
}

TEST_CASE("softmax cross entropy gradients pass finite differences") {
  Rng rng(13);
  auto logits = TensorD::randn({4, 6}, rng, 2.0);
  std::vector<std::size_t> labels{0, 5, 2, 2};
  check_grad_against_fd(
      [&](Tape<double>* t, const TensorD& v) {
        return softmax_cross_entropy<double>(t, v, labels);
      },
      logits.clone());
  CHECK_THROWS_AS(
      softmax_cross_entropy<double>(nullptr, logits, {0, 1, 2, 6}),
      ContractError);
}

TEST_CASE("a full discriminator-style stack passes finite differences") {
  Rng rng(14);
  auto x = TensorD::randn({2, 2, 8, 8}, rng, 0.7);
  auto k1 = TensorD::randn({4, 2, 4, 4}, rng, 0.3);
  auto gamma = TensorD::full({4}, 1.0);
  auto beta = TensorD::zeros({4});
  auto w = TensorD::randn({64, 1}, rng, 0.2);
  auto b = TensorD::zeros({1});

  auto stack = [&](Tape<double>* t, const TensorD& kernel) {
    RunningStats<double> stats(4);
    auto h1 = conv2d<double>(t, x, kernel, 2, 1);
    auto h2 = batchnorm<double>(t, h1, gamma, beta, stats, BnMode::train);
    auto h3 = leaky_relu<double>(t, h2, 0.2);
    auto flat = reshape<double>(t, h3, {2, 64});
    auto score = sigmoid<double>(t, affine<double>(t, flat, w, b));
    auto logp = log_clamped<double>(t, score, 1e-8);
    return scale<double>(t, sum_all(t, logp), -0.5);
  };
  check_grad_against_fd(stack, k1.clone(), 5e-6);
}

}  // TEST_SUITE
