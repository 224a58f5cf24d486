#pragma once

#include <cstddef>

namespace camd::diff::detail {

// C = alpha * op(A) * op(B) + beta * C, row-major, op = transpose when flagged.
// op(A) is m x k, op(B) is k x n, C is m x n.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

}  // namespace camd::diff::detail
