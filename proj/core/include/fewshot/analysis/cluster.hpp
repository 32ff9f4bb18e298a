#pragma once

#include <string>
#include <string_view>

#include "fewshot/analysis/feature_sample.hpp"

namespace fewshot {

enum class InterClassDistance {
  centroid,  ///< mean pairwise L2 distance between class centroids
  items,     ///< mean L2 distance over all pairs of items from different classes
};

std::string to_string(InterClassDistance d);
InterClassDistance parse_inter_class_distance(std::string_view text);

/// Cluster compactness of labeled features.
///   d1    mean over classes of the mean pairwise L2 distance within the class
///   v     mean over classes of the mean squared L2 distance to the centroid
///   inter inter-class distance (see InterClassDistance)
///   r     d1 / inter
/// Single-item classes contribute 0 to d1 and v.
struct ClusterMetrics {
  double d1 = 0.0;
  double v = 0.0;
  double inter = 0.0;
  double r = 0.0;
};

/// Throws ConfigError with fewer than two classes and DataError when the
/// inter-class distance is zero.
ClusterMetrics cluster_metrics(const FeatureSample& sample,
                               InterClassDistance inter = InterClassDistance::centroid);

}  // namespace fewshot
