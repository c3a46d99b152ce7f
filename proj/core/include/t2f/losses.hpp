#pragma once

#include "t2f/ops.hpp"
#include "t2f/tape.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

namespace detail {

// -mean(log x), with the log floored so saturated sigmoids cannot produce
// an infinite loss.
template <typename T>
Tensor<T> neg_mean_log(Tape<T>* tape, const Tensor<T>& x, T floor) {
  return scale(tape, mean_all(tape, log_clamped(tape, x, floor)), T(-1));
}

}  // namespace detail

// Matching-aware discriminator objective over three score batches, each
// [n, 1] in (0, 1):
//   real image + matching caption        -> pushed toward 1
//   real image + mismatched caption      -> pushed toward 0
//   generated image + matching caption   -> pushed toward 0
// The two negative terms share weight 1/2 so real and synthetic evidence
// balance:
//   L = -mean log s_r - (mean log(1 - s_w) + mean log(1 - s_f)) / 2
template <typename T>
Tensor<T> discriminator_loss(Tape<T>* tape, const Tensor<T>& real_matched,
                             const Tensor<T>& real_mismatched,
                             const Tensor<T>& fake_matched,
                             T floor = T(1e-8)) {
  auto real_term = detail::neg_mean_log(tape, real_matched, floor);
  auto wrong_term =
      detail::neg_mean_log(tape, one_minus(tape, real_mismatched), floor);
  auto fake_term =
      detail::neg_mean_log(tape, one_minus(tape, fake_matched), floor);
  return add(tape, real_term,
             scale(tape, add(tape, wrong_term, fake_term), T(0.5)));
}

// Non-saturating generator objective: maximize the score the discriminator
// assigns to generated images under their own captions.
//   L = -mean log s_f
template <typename T>
Tensor<T> generator_loss(Tape<T>* tape, const Tensor<T>& fake_matched,
                         T floor = T(1e-8)) {
  return detail::neg_mean_log(tape, fake_matched, floor);
}

}  // namespace t2f
