#pragma once

#include <vector>

#include "fewshot/analysis/feature_sample.hpp"

namespace fewshot {

inline constexpr double kVarianceFloor = 1e-8;

/// Axis-aligned Gaussian fitted by maximum likelihood (1/n variances).
struct DiagonalGaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Variances are floored at `variance_floor`.
DiagonalGaussian fit_diagonal_gaussian(const Matrix& features,
                                       double variance_floor = kVarianceFloor);

/// Closed-form KL(p || q) between diagonal Gaussians:
///   0.5 * sum_j [ log(q_var/p_var) + (p_var + (p_mean - q_mean)^2) / q_var - 1 ]
double kl_divergence(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// KL(target || source) after fitting a diagonal Gaussian to each sample.
/// Throws ShapeError on a dimension mismatch and ConfigError when either
/// sample has fewer than two rows.
double gaussian_kl(const FeatureSample& source, const FeatureSample& target);

}  // namespace fewshot
