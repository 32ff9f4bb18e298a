#pragma once

#include <cstddef>

namespace fewshot {

/// Row-major C(m x n) = op(A) * op(B), or C += op(A) * op(B) when accumulate
/// is set. op(A) is m x k, op(B) is k x n. The double instantiation is backed
/// by Eigen; other scalar types use a plain loop nest.
template <typename T>
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

}  // namespace fewshot
