#pragma once

#include <cstddef>
#include <span>

namespace fewshot {

struct AccuracySummary {
  double mean = 0.0;
  double ci_half_width = 0.0;  ///< 1.96 * population std / sqrt(n)
  std::size_t count = 0;
};

/// Throws ConfigError on an empty list.
AccuracySummary aggregate_accuracy(std::span<const double> per_episode);

}  // namespace fewshot
