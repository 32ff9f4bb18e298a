#include "fewshot/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/common/dual.hpp"
#include "fewshot/common/gemm.hpp"

namespace fewshot::layers {
namespace {

// col has rows (ci, ky, kx) and columns (b, y, x).
template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t n, std::size_t h, std::size_t w, T* col) {
  const std::size_t plane = h * w;
  const std::size_t cols = n * plane;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = col + (ci * 9 + ky * 3 + kx) * cols;
        for (std::size_t b = 0; b < n; ++b) {
          const T* src = x + (ci * n + b) * plane;
          for (std::size_t y = 0; y < h; ++y) {
            T* out = dst + b * plane + y * w;
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
              std::fill(out, out + w, T(0));
              continue;
            }
            const T* row = src + static_cast<std::size_t>(sy) * w;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
              out[xx] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w))
                            ? T(0)
                            : row[static_cast<std::size_t>(sx)];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const T* col, std::size_t cin, std::size_t n, std::size_t h,
                       std::size_t w, T* dx) {
  const std::size_t plane = h * w;
  const std::size_t cols = n * plane;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* src = col + (ci * 9 + ky * 3 + kx) * cols;
        for (std::size_t b = 0; b < n; ++b) {
          T* dst = dx + (ci * n + b) * plane;
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* in = src + b * plane + y * w;
            T* row = dst + static_cast<std::size_t>(sy) * w;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              row[static_cast<std::size_t>(sx)] += in[xx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv3x3_forward(const T* x, std::size_t cin, std::size_t n, std::size_t h, std::size_t w,
                     const T* weight, std::size_t cout, T* y, std::vector<T>& scratch) {
  const std::size_t cols = n * h * w;
  scratch.resize(cin * 9 * cols);
  im2col(x, cin, n, h, w, scratch.data());
  gemm<T>(false, false, cout, cols, cin * 9, weight, scratch.data(), y, false);
}

template <typename T>
void conv3x3_backward(const T* x, std::size_t cin, std::size_t n, std::size_t h, std::size_t w,
                      const T* weight, std::size_t cout, const T* dy, T* dweight, T* dx,
                      std::vector<T>& scratch) {
  const std::size_t cols = n * h * w;
  scratch.resize(cin * 9 * cols);
  im2col(x, cin, n, h, w, scratch.data());
  gemm<T>(false, true, cout, cin * 9, cols, dy, scratch.data(), dweight, false);
  if (dx != nullptr) {
    gemm<T>(true, false, cin * 9, cols, cout, weight, dy, scratch.data(), false);
    std::fill(dx, dx + cin * cols, T(0));
    col2im_accumulate(scratch.data(), cin, n, h, w, dx);
  }
}

template <typename T>
void batchnorm_forward(const BnLayout& layout, const T* x, const T* gamma, const T* beta,
                       BatchNormMode mode, const double* running_mean, const double* running_var,
                       double* update_mean, double* update_var, T* y, BnCache<T>* cache) {
  using std::sqrt;
  const std::size_t m = layout.count;
  std::vector<T> local_xhat;
  std::vector<T> local_inv;
  std::vector<T>& xhat = cache ? cache->xhat : local_xhat;
  std::vector<T>& inv_std = cache ? cache->inv_std : local_inv;
  xhat.assign(layout.channels * m, T(0));
  inv_std.assign(layout.channels, T(0));
  if (cache) cache->batch_stats = mode != BatchNormMode::running_stats;

  for (std::size_t c = 0; c < layout.channels; ++c) {
    T mean(0);
    T inv(0);
    if (mode == BatchNormMode::running_stats) {
      mean = T(running_mean[c]);
      inv = T(1.0) / sqrt(T(running_var[c] + kBatchNormEpsilon));
    } else {
      for (std::size_t i = 0; i < m; ++i) mean += x[layout.index(c, i)];
      mean /= T(static_cast<double>(m));
      T var(0);
      for (std::size_t i = 0; i < m; ++i) {
        const T d = x[layout.index(c, i)] - mean;
        var += d * d;
      }
      var /= T(static_cast<double>(m));
      inv = T(1.0) / sqrt(var + T(kBatchNormEpsilon));
      if (mode == BatchNormMode::batch_stats_update) {
        const double unbiased =
            m > 1 ? value_of(var) * static_cast<double>(m) / static_cast<double>(m - 1)
                  : value_of(var);
        update_mean[c] = (1.0 - kBatchNormMomentum) * update_mean[c] +
                         kBatchNormMomentum * value_of(mean);
        update_var[c] = (1.0 - kBatchNormMomentum) * update_var[c] + kBatchNormMomentum * unbiased;
      }
    }
    inv_std[c] = inv;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = layout.index(c, i);
      const T xh = (x[k] - mean) * inv;
      xhat[c * m + i] = xh;
      y[k] = gamma[c] * xh + beta[c];
    }
  }
}

template <typename T>
void batchnorm_backward(const BnLayout& layout, const T* dy, const T* gamma,
                        const BnCache<T>& cache, T* dx, T* dgamma, T* dbeta) {
  const std::size_t m = layout.count;
  const T count(static_cast<double>(m));
  for (std::size_t c = 0; c < layout.channels; ++c) {
    T sum_dy(0);
    T sum_dy_xhat(0);
    for (std::size_t i = 0; i < m; ++i) {
      const T g = dy[layout.index(c, i)];
      sum_dy += g;
      sum_dy_xhat += g * cache.xhat[c * m + i];
    }
    dgamma[c] = sum_dy_xhat;
    dbeta[c] = sum_dy;
    if (dx == nullptr) continue;
    const T inv = cache.inv_std[c];
    if (!cache.batch_stats) {
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = layout.index(c, i);
        dx[k] = dy[k] * gamma[c] * inv;
      }
      continue;
    }
    // dxhat = dy * gamma, so the per-channel sums scale by gamma.
    const T scale = gamma[c] * inv / count;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = layout.index(c, i);
      dx[k] = scale * (count * dy[k] - sum_dy - cache.xhat[c * m + i] * sum_dy_xhat);
    }
  }
}

template <typename T>
void relu_forward(std::span<T> values) {
  for (T& v : values) {
    if (!(v > T(0))) v = T(0);
  }
}

template <typename T>
void relu_backward(std::span<const T> output, std::span<T> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > T(0))) grad[i] = T(0);
  }
}

template <typename T>
void maxpool2_forward(const T* x, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
                      T* y, std::vector<std::uint32_t>& argmax) {
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  argmax.resize(c * n * oh * ow);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < c * n; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t yy = 0; yy < oh; ++yy) {
      for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
        std::size_t best = base + (2 * yy) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t k = base + (2 * yy + dy) * w + 2 * xx + dx;
            if (x[k] > x[best]) best = k;
          }
        }
        argmax[o] = static_cast<std::uint32_t>(best);
        y[o] = x[best];
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const std::vector<std::uint32_t>& argmax, const T* dy, T* dx,
                       std::size_t input_size) {
  std::fill(dx, dx + input_size, T(0));
  for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
}

template <typename T>
void linear_forward(const T* x, std::size_t n, std::size_t in, const T* weight, const T* bias,
                    std::size_t out, T* y) {
  gemm<T>(false, true, n, out, in, x, weight, y, false);
  if (bias == nullptr) return;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < out; ++j) y[r * out + j] += bias[j];
  }
}

template <typename T>
void linear_backward(const T* x, std::size_t n, std::size_t in, const T* weight, std::size_t out,
                     const T* dy, T* dweight, T* dbias, T* dx) {
  gemm<T>(true, false, out, in, n, dy, x, dweight, false);
  if (dbias != nullptr) {
    for (std::size_t j = 0; j < out; ++j) dbias[j] = T(0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < out; ++j) dbias[j] += dy[r * out + j];
    }
  }
  if (dx != nullptr) gemm<T>(false, false, n, in, out, dy, weight, dx, false);
}

template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels,
                        Tensor<T>* dlogits) {
  using std::exp;
  using std::log;
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  if (dlogits) *dlogits = Tensor<T>({n, c});
  T total(0);
  std::vector<T> e(c);
  const T inv_n(1.0 / static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= c) throw ShapeError("label " + std::to_string(labels[r]) + " out of range");
    auto z = logits.row(r);
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) {
      if (z[j] > mx) mx = z[j];
    }
    T sum(0);
    for (std::size_t j = 0; j < c; ++j) {
      e[j] = exp(z[j] - mx);
      sum += e[j];
    }
    total += log(sum) - (z[labels[r]] - mx);
    if (dlogits) {
      auto g = dlogits->row(r);
      for (std::size_t j = 0; j < c; ++j) g[j] = e[j] / sum * inv_n;
      g[labels[r]] -= inv_n;
    }
  }
  return total * inv_n;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  using std::exp;
  Tensor<T> out(logits.dims());
  const std::size_t c = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    auto z = logits.row(r);
    auto p = out.row(r);
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) {
      if (z[j] > mx) mx = z[j];
    }
    T sum(0);
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = exp(z[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= sum;
  }
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

#define FEWSHOT_INSTANTIATE_LAYERS(T)                                                           \
  template void conv3x3_forward<T>(const T*, std::size_t, std::size_t, std::size_t,            \
                                   std::size_t, const T*, std::size_t, T*, std::vector<T>&);   \
  template void conv3x3_backward<T>(const T*, std::size_t, std::size_t, std::size_t,           \
                                    std::size_t, const T*, std::size_t, const T*, T*, T*,      \
                                    std::vector<T>&);                                          \
  template void batchnorm_forward<T>(const BnLayout&, const T*, const T*, const T*,            \
                                     BatchNormMode, const double*, const double*, double*,     \
                                     double*, T*, BnCache<T>*);                                \
  template void batchnorm_backward<T>(const BnLayout&, const T*, const T*, const BnCache<T>&,  \
                                      T*, T*, T*);                                             \
  template void relu_forward<T>(std::span<T>);                                                 \
  template void relu_backward<T>(std::span<const T>, std::span<T>);                            \
  template void maxpool2_forward<T>(const T*, std::size_t, std::size_t, std::size_t,           \
                                    std::size_t, T*, std::vector<std::uint32_t>&);             \
  template void maxpool2_backward<T>(const std::vector<std::uint32_t>&, const T*, T*,          \
                                     std::size_t);                                             \
  template void linear_forward<T>(const T*, std::size_t, std::size_t, const T*, const T*,      \
                                  std::size_t, T*);                                            \
  template void linear_backward<T>(const T*, std::size_t, std::size_t, const T*, std::size_t,  \
                                   const T*, T*, T*, T*);                                      \
  template T softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>,          \
                                      Tensor<T>*);                                             \
  template Tensor<T> softmax_rows<T>(const Tensor<T>&);

FEWSHOT_INSTANTIATE_LAYERS(double)
FEWSHOT_INSTANTIATE_LAYERS(Dual)

#undef FEWSHOT_INSTANTIATE_LAYERS

}  // namespace fewshot::layers
