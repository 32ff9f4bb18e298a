#pragma once

#include <cstddef>
#include <cstdint>

#include "fewshot/analysis/cluster.hpp"
#include "fewshot/analysis/feature_sample.hpp"
#include "fewshot/paradigms/evaluation.hpp"

namespace fewshot {

/// Evaluation-mode features of `count` items drawn without replacement
/// (every item when count exceeds the dataset). Rows follow class-major order.
FeatureSample sample_features(const FeatureBank& bank, const LabeledDataset& dataset,
                              std::size_t count, std::uint64_t seed);

struct Diagnostics {
  double kl = 0.0;  ///< KL(target || source)
  ClusterMetrics cluster;  ///< of the target sample
  std::size_t subsample = 0;
};

/// Divergence over equal-sized subsamples of both datasets (at most
/// `subsample` each) plus cluster compactness of the target sample.
Diagnostics compute_diagnostics(const FeatureBank& source_bank, const LabeledDataset& source,
                                const FeatureBank& target_bank, const LabeledDataset& target,
                                std::size_t subsample, std::uint64_t seed,
                                InterClassDistance inter = InterClassDistance::centroid);

}  // namespace fewshot
