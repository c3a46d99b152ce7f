#pragma once

#include <cstddef>

namespace t2f::detail {

// C[M,N] += A[M,K] * B[K,N]. ikj order: the inner loop runs over contiguous
// rows of B and C, which the compiler vectorizes without reassociating any
// reduction, so results are bit-stable.
template <typename T>
void gemm_nn(std::size_t M, std::size_t K, std::size_t N, const T* A,
             const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    const T* a = A + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      T av = a[k];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T: every output element is a dot product over
// contiguous rows of both operands. Four fixed accumulators keep the
// summation order independent of the compiler's vector width.
template <typename T>
void gemm_nt(std::size_t M, std::size_t K, std::size_t N, const T* A,
             const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a = A + i * K;
    for (std::size_t j = 0; j < N; ++j) {
      const T* b = B + j * K;
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      std::size_t k = 0;
      for (; k + 4 <= K; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
      }
      for (; k < K; ++k) s0 += a[k] * b[k];
      C[i * N + j] += ((s0 + s1) + (s2 + s3));
    }
  }
}

}  // namespace t2f::detail
