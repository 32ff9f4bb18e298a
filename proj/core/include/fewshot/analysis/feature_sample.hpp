#pragma once

#include <string>
#include <vector>

#include "fewshot/common/tensor.hpp"

namespace fewshot {

/// Feature matrix (n, d) with one class label per row.
struct FeatureSample {
  Matrix features;
  std::vector<std::size_t> labels;
  std::string dataset;

  [[nodiscard]] std::size_t count() const { return features.rank() == 2 ? features.dim(0) : 0; }
  [[nodiscard]] std::size_t dim() const { return features.rank() == 2 ? features.dim(1) : 0; }

  /// Throws ConfigError unless n >= 2, labels match rows and all entries are
  /// finite.
  void validate() const;
};

}  // namespace fewshot
