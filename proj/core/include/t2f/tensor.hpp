#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "t2f/error.hpp"
#include "t2f/rng.hpp"

namespace t2f {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline void check_same_shape(const Shape& a, const Shape& b,
                             const char* where) {
  if (a != b)
    throw ContractError(std::string(where) + ": shape mismatch " +
                        shape_str(a) + " vs " + shape_str(b));
}

namespace detail {
template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool leaf = true;  // false for op outputs; only leaves collect .grad
};
}  // namespace detail

// Dense row-major tensor. Copying a Tensor copies a handle to shared storage;
// ops never mutate their inputs, so sharing is safe. Gradients accumulate on
// leaf tensors only (the ones created directly rather than by an op).
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() : impl_(std::make_shared<detail::TensorImpl<T>>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.impl_->data.assign(numel(shape), T(0));
    t.impl_->shape = std::move(shape);
    return t;
  }

  static Tensor full(Shape shape, T value) {
    Tensor t;
    t.impl_->data.assign(numel(shape), value);
    t.impl_->shape = std::move(shape);
    return t;
  }

  static Tensor scalar(T value) { return full({}, value); }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    if (data.size() != numel(shape))
      throw ContractError("from_data: " + std::to_string(data.size()) +
                          " values for shape " + shape_str(shape));
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v)))
        throw ContractError("from_data: non-finite value");
    Tensor t;
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng, T stddev = T(1),
                      T mean = T(0)) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->data)
      v = static_cast<T>(rng.normal(static_cast<double>(mean),
                                    static_cast<double>(stddev)));
    return t;
  }

  static Tensor uniform(Shape shape, Rng& rng, T lo, T hi) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->data)
      v = static_cast<T>(
          rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }

  T item() const {
    if (size() != 1)
      throw ContractError("item: tensor has " + std::to_string(size()) +
                          " elements, expected 1");
    return impl_->data[0];
  }

  T at(std::size_t flat) const { return impl_->data.at(flat); }

  Tensor& set_requires_grad(bool on = true) {
    impl_->requires_grad = on;
    return *this;
  }
  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const {
    if (impl_->grad.empty())
      throw ContractError("grad: no gradient accumulated");
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  void accumulate_grad(std::span<const T> g) {
    if (g.size() != size())
      throw ContractError("accumulate_grad: size mismatch");
    if (impl_->grad.empty()) impl_->grad.assign(size(), T(0));
    for (std::size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<U>(impl_->data[i]);
    return Tensor<U>::from_raw(impl_->shape, std::move(out));
  }

  bool all_finite() const {
    for (T v : impl_->data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Deep copy of values; the copy is a fresh leaf.
  Tensor clone() const {
    Tensor t;
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    return t;
  }

  // Same storage viewed under a different shape with equal element count.
  // Used by ops that reinterpret layout without touching values.
  static Tensor from_raw(Shape shape, std::vector<T> data) {
    Tensor t;
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    return t;
  }

  detail::TensorImpl<T>* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl<T>> impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace t2f
