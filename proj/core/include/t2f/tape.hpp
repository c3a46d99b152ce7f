#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "t2f/tensor.hpp"

namespace t2f {

// Scratch gradients for one backward pass. Buffers live here, not on the
// tensors: only leaf tensors receive durable .grad, and a second backward
// call therefore adds an identical contribution instead of compounding stale
// intermediate state.
template <typename T>
class GradStore {
 public:
  std::vector<T>& buf(const Tensor<T>& t) {
    auto* impl = t.impl();
    auto it = map_.find(impl);
    if (it == map_.end())
      it = map_.emplace(impl, std::vector<T>(t.size(), T(0))).first;
    return it->second;
  }

  const std::vector<T>* find(const Tensor<T>& t) const {
    auto it = map_.find(t.impl());
    return it == map_.end() ? nullptr : &it->second;
  }

  void deposit_leaves() {
    for (auto& [impl, grad] : map_)
      if (impl->leaf && impl->requires_grad) {
        if (impl->grad.empty()) impl->grad.assign(grad.size(), T(0));
        for (std::size_t i = 0; i < grad.size(); ++i) impl->grad[i] += grad[i];
      }
  }

 private:
  std::unordered_map<detail::TensorImpl<T>*, std::vector<T>> map_;
};

// Execution-order record of differentiable ops. Ops append as they run, so
// the node list is topologically ordered by construction; backward walks it
// once in reverse. Single-owner: one tape per training step, never shared
// across threads.
template <typename T>
class Tape {
 public:
  // pull(gout, grads): given the output gradient, add each input's
  // contribution into grads. Registered by the op that produced `out`.
  using Pull = std::function<void(const std::vector<T>&, GradStore<T>&)>;

  void record(const Tensor<T>& out, std::vector<Tensor<T>> inputs,
              Pull pull) {
    nodes_.push_back(Node{out, std::move(inputs), std::move(pull)});
  }

  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(loss)/d(leaf) into every reachable leaf tensor that
  // requires grad. `loss` must be a scalar produced by an op on this tape.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
      throw ContractError("backward: loss must be scalar, got shape " +
                          shape_str(loss.shape()));
    bool recorded = false;
    for (const auto& node : nodes_)
      if (node.out.impl() == loss.impl()) {
        recorded = true;
        break;
      }
    if (!recorded)
      throw ContractError("backward: loss was not produced on this tape");

    GradStore<T> grads;
    grads.buf(loss)[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      const std::vector<T>* gout = grads.find(it->out);
      if (!gout) continue;  // not on a path to the loss
      it->pull(*gout, grads);
    }
    grads.deposit_leaves();
  }

 private:
  struct Node {
    Tensor<T> out;
    std::vector<Tensor<T>> inputs;  // keeps upstream storage alive
    Pull pull;
  };
  std::vector<Node> nodes_;
};

namespace detail {

// Wires an op result into the tape: the output requires grad iff any input
// does, and in that case the pull closure is recorded.
template <typename T>
Tensor<T> op_result(Tape<T>* tape, Tensor<T> out,
                    std::vector<Tensor<T>> inputs,
                    typename Tape<T>::Pull pull) {
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (tape && any) {
    out.impl()->leaf = false;
    out.impl()->requires_grad = true;
    tape->record(out, std::move(inputs), std::move(pull));
  }
  return out;
}

}  // namespace detail

}  // namespace t2f
