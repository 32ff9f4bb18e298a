#pragma once

// Functional building blocks with explicit backward passes. Every function is
// instantiated for double and Dual.
//
// Convolutional activations use a channel-major (C, N, H, W) layout so that
// a convolution is a single GEMM over the whole batch and every batch-norm
// channel is contiguous.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fewshot/common/tensor.hpp"

namespace fewshot::layers {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class BatchNormMode {
  batch_stats_update,  ///< normalize with batch statistics, update running statistics
  batch_stats,         ///< normalize with batch statistics, running statistics untouched
  running_stats,       ///< normalize with running statistics (evaluation)
};

/// 3x3 convolution, stride 1, zero padding 1, no bias.
/// x: (cin, n, h, w); weight: (cout, cin * 9); y: (cout, n, h, w).
template <typename T>
void conv3x3_forward(const T* x, std::size_t cin, std::size_t n, std::size_t h, std::size_t w,
                     const T* weight, std::size_t cout, T* y, std::vector<T>& scratch);

/// Writes dweight (overwrites) and, when dx is non-null, dx (overwrites).
template <typename T>
void conv3x3_backward(const T* x, std::size_t cin, std::size_t n, std::size_t h, std::size_t w,
                      const T* weight, std::size_t cout, const T* dy, T* dweight, T* dx,
                      std::vector<T>& scratch);

/// Strided view of a batch-norm input: element (c, i) lives at
/// c * channel_stride + i * element_stride.
struct BnLayout {
  std::size_t channels = 0;
  std::size_t count = 0;
  std::size_t channel_stride = 0;
  std::size_t element_stride = 0;

  [[nodiscard]] std::size_t index(std::size_t c, std::size_t i) const noexcept {
    return c * channel_stride + i * element_stride;
  }
};

template <typename T>
struct BnCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;  // per channel
  bool batch_stats = true;
};

/// running_mean/running_var are read in running_stats mode and updated in
/// batch_stats_update mode; they may be null in batch_stats mode.
template <typename T>
void batchnorm_forward(const BnLayout& layout, const T* x, const T* gamma, const T* beta,
                       BatchNormMode mode, const double* running_mean, const double* running_var,
                       double* update_mean, double* update_var, T* y, BnCache<T>* cache);

template <typename T>
void batchnorm_backward(const BnLayout& layout, const T* dy, const T* gamma,
                        const BnCache<T>& cache, T* dx, T* dgamma, T* dbeta);

template <typename T>
void relu_forward(std::span<T> values);

/// dx = dy where the forward output was positive.
template <typename T>
void relu_backward(std::span<const T> output, std::span<T> grad);

/// 2x2 max pool, stride 2, floor semantics. x: (c, n, h, w) -> (c, n, h/2, w/2).
/// Ties resolve to the first element in row-major window order.
template <typename T>
void maxpool2_forward(const T* x, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
                      T* y, std::vector<std::uint32_t>& argmax);

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax, const T* dy, T* dx,
                       std::size_t input_size);

/// y = x W^T + b. x: (n, in); weight: (out, in); bias: (out) or null.
template <typename T>
void linear_forward(const T* x, std::size_t n, std::size_t in, const T* weight, const T* bias,
                    std::size_t out, T* y);

/// Overwrites dweight, dbias (if non-null) and dx (if non-null).
template <typename T>
void linear_backward(const T* x, std::size_t n, std::size_t in, const T* weight, std::size_t out,
                     const T* dy, T* dweight, T* dbias, T* dx);

/// Mean softmax cross-entropy over rows of logits (n, c). When dlogits is
/// non-null it receives d(loss)/d(logits).
template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels,
                        Tensor<T>* dlogits);

/// Row-wise softmax.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> row);

}  // namespace fewshot::layers
