#include <cmath>

#include "doctest.h"
#include "t2f/adam.hpp"
#include "t2f/ops.hpp"
#include "t2f/tape.hpp"

using namespace t2f;

TEST_SUITE("adam") {

TEST_CASE("first step matches the closed-form update") {
  // With p=1, g=1, lr=1e-3, beta1=beta2=0.5:
  //   m = 0.5*0 + 0.5*1 = 0.5, v = 0.5, bias corrections both 0.5,
  //   m_hat = v_hat = 1, so p' = 1 - lr * 1/(1 + eps).
  auto p = TensorD::from_data({1}, {1.0});
  p.set_requires_grad(true);
  p.accumulate_grad(std::vector<double>{1.0});

  AdamState<double> opt(0.5, 0.5);
  std::vector<TensorD> params{p};
  opt.attach(params);
  opt.step(params, 1e-3);

  double expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
  CHECK(p.at(0) == expected);
  CHECK(opt.step_count() == 1);
  CHECK(opt.m(0)[0] == 0.5);
  CHECK(opt.v(0)[0] == 0.5);
}

TEST_CASE("two steps with constant gradient match hand iteration") {
  auto p = TensorD::from_data({1}, {1.0});
  p.set_requires_grad(true);
  AdamState<double> opt(0.5, 0.999);
  std::vector<TensorD> params{p};
  opt.attach(params);

  double m = 0, v = 0, ref = 1.0;
  const double lr = 0.01, g = 2.0, eps = 1e-8;
  for (int t = 1; t <= 2; ++t) {
    p.zero_grad();
    p.accumulate_grad(std::vector<double>{g});
    opt.step(params, lr);

    m = 0.5 * m + 0.5 * g;
    v = 0.999 * v + 0.001 * g * g;
    double mh = m / (1 - std::pow(0.5, t));
    double vh = v / (1 - std::pow(0.999, t));
    ref -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(p.at(0) == doctest::Approx(ref).epsilon(1e-15));
  }
}

TEST_CASE("missing gradients leave parameters untouched but advance time") {
  auto a = TensorD::from_data({2}, {1.0, 2.0});
  auto b = TensorD::from_data({1}, {3.0});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  b.accumulate_grad(std::vector<double>{1.0});

  AdamState<double> opt(0.5, 0.5);
  std::vector<TensorD> params{a, b};
  opt.attach(params);
  opt.step(params, 0.1);

  CHECK(a.at(0) == 1.0);
  CHECK(a.at(1) == 2.0);
  CHECK(b.at(0) < 3.0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("descends a quadratic bowl") {
  auto p = TensorD::from_data({3}, {5.0, -4.0, 2.0});
  p.set_requires_grad(true);
  AdamState<double> opt(0.5, 0.5);
  std::vector<TensorD> params{p};
  opt.attach(params);

  auto objective = [&] {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += p.at(i) * p.at(i);
    return s;
  };
  double start = objective();
  for (int t = 0; t < 200; ++t) {
    p.zero_grad();
    Tape<double> tape;
    auto loss = sum_all(&tape, mul<double>(&tape, p, p));
    tape.backward(loss);
    opt.step(params, 0.05);
  }
  CHECK(objective() < 1e-2 * start);
}

TEST_CASE("rejects parameter lists that do not match the attached slots") {
  auto a = TensorD::from_data({2}, {1.0, 2.0});
  a.set_requires_grad(true);
  AdamState<double> opt(0.5, 0.5);
  std::vector<TensorD> params{a};
  opt.attach(params);

  std::vector<TensorD> wrong{a, a};
  CHECK_THROWS_AS(opt.step(wrong, 0.1), ContractError);

  std::vector<TensorD> resized{TensorD::zeros({3})};
  resized[0].set_requires_grad(true);
  CHECK_THROWS_AS(opt.step(resized, 0.1), ContractError);
}

TEST_CASE("step count round-trips for checkpoint restore") {
  AdamState<double> opt(0.5, 0.5);
  auto p = TensorD::from_data({1}, {1.0});
  p.set_requires_grad(true);
  std::vector<TensorD> params{p};
  opt.attach(params);
  opt.set_step_count(41);
  p.accumulate_grad(std::vector<double>{1.0});
  opt.step(params, 1e-3);
  CHECK(opt.step_count() == 42);
}

}  // TEST_SUITE
