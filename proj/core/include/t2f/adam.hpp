#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "t2f/tensor.hpp"

namespace t2f {

// Adam with bias correction. One state covers an ordered parameter list; a
// step advances every parameter and the shared step count together.
template <typename T>
class AdamState {
 public:
  AdamState(T beta1, T beta2, T eps = T(1e-8))
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<Tensor<T>>& params) {
    slots_.clear();
    for (const auto& p : params)
      slots_.push_back({std::vector<T>(p.size(), T(0)),
                        std::vector<T>(p.size(), T(0))});
  }

  std::size_t step_count() const { return step_; }
  std::size_t slot_count() const { return slots_.size(); }
  T beta1() const { return beta1_; }
  T beta2() const { return beta2_; }
  T eps() const { return eps_; }

  // In-place update from each parameter's accumulated gradient. Parameters
  // with no accumulated gradient are treated as zero-gradient (their moments
  // still decay). Gradients are left untouched; callers zero them.
  void step(std::vector<Tensor<T>>& params, T lr) {
    if (params.size() != slots_.size())
      throw ContractError("adam_step: " + std::to_string(params.size()) +
                          " params vs " + std::to_string(slots_.size()) +
                          " state slots");
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_));
    for (std::size_t s = 0; s < params.size(); ++s) {
      auto& p = params[s];
      if (p.size() != slots_[s].m.size())
        throw ContractError("adam_step: param size changed under state");
      auto data = p.mutable_data();
      auto& m = slots_[s].m;
      auto& v = slots_[s].v;
      const bool has = p.has_grad();
      std::span<const T> grad = has ? p.grad() : std::span<const T>{};
      for (std::size_t i = 0; i < data.size(); ++i) {
        T gi = has ? grad[i] : T(0);
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * gi;
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * gi * gi;
        T mhat = m[i] / bc1;
        T vhat = v[i] / bc2;
        data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  // Serialization accessors (checkpoint I/O).
  const std::vector<T>& m(std::size_t s) const { return slots_[s].m; }
  const std::vector<T>& v(std::size_t s) const { return slots_[s].v; }
  std::vector<T>& m(std::size_t s) { return slots_[s].m; }
  std::vector<T>& v(std::size_t s) { return slots_[s].v; }
  void set_step_count(std::size_t n) { step_ = n; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  T beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace t2f
