#include "fewshot/common/gemm.hpp"

#include <Eigen/Core>

#include "fewshot/common/dual.hpp"

namespace fewshot {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

template <typename Lhs, typename Rhs>
void assign(Map& out, const Lhs& lhs, const Rhs& rhs, bool accumulate) {
  if (accumulate) {
    out.noalias() += lhs * rhs;
  } else {
    out.noalias() = lhs * rhs;
  }
}

}  // namespace

template <>
void gemm<double>(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n,
                  std::size_t k, const double* a, const double* b, double* c,
                  bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Map out(c, mi, ni);
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) out.setZero();
    return;
  }
  // A stored as (k x m) when transposed, (m x k) otherwise; same for B.
  if (!transpose_a && !transpose_b) {
    assign(out, ConstMap(a, mi, ki), ConstMap(b, ki, ni), accumulate);
  } else if (transpose_a && !transpose_b) {
    assign(out, ConstMap(a, ki, mi).transpose(), ConstMap(b, ki, ni), accumulate);
  } else if (!transpose_a && transpose_b) {
    assign(out, ConstMap(a, mi, ki), ConstMap(b, ni, ki).transpose(), accumulate);
  } else {
    assign(out, ConstMap(a, ki, mi).transpose(), ConstMap(b, ni, ki).transpose(), accumulate);
  }
}

template <>
void gemm<Dual>(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
                const Dual* a, const Dual* b, Dual* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Dual acc = accumulate ? c[i * n + j] : Dual{};
      for (std::size_t p = 0; p < k; ++p) {
        const Dual& av = transpose_a ? a[p * m + i] : a[i * k + p];
        const Dual& bv = transpose_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

}  // namespace fewshot
