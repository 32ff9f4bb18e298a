#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fewshot/common/rng.hpp"
#include "fewshot/data/dataset.hpp"

namespace fewshot {

struct EpisodeItem {
  ItemRef ref;
  std::size_t label = 0;  ///< local label in [0, way)
};

/// One N-way K-shot task. Support and query items are listed class by class
/// in local-label order.
struct Episode {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t query_per_class = 0;
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::vector<std::size_t> class_map;  ///< local label -> global class index

  [[nodiscard]] std::vector<ItemRef> support_refs() const;
  [[nodiscard]] std::vector<ItemRef> query_refs() const;
  [[nodiscard]] std::vector<std::size_t> support_labels() const;
  [[nodiscard]] std::vector<std::size_t> query_labels() const;

  friend bool operator==(const Episode&, const Episode&) = default;
};

inline bool operator==(const EpisodeItem& a, const EpisodeItem& b) {
  return a.ref == b.ref && a.label == b.label;
}

/// Draws `way` distinct classes, then `shot` support and `query` query items
/// per class without replacement. Class and item choice depend only on the
/// rng state. Throws DataError when the dataset has fewer than `way` classes
/// or a drawn class has fewer than shot + query items.
Episode sample_episode(const LabeledDataset& dataset, std::size_t way, std::size_t shot,
                       std::size_t query, Rng& rng);

/// Human-readable list of broken episode invariants (empty when valid):
/// distinct classes, per-class cardinalities, disjoint support/query,
/// contiguous local labels, class_map bijective onto the drawn classes.
std::vector<std::string> episode_violations(const Episode& episode);

struct Batch {
  std::vector<ItemRef> items;
  std::vector<std::size_t> labels;  ///< global class indices
};

/// One epoch of shuffled mini-batches visiting every item exactly once; the
/// last batch may be short. Throws DataError for an empty dataset and
/// ConfigError for batch_size 0.
std::vector<Batch> sample_batches(const LabeledDataset& dataset, std::size_t batch_size, Rng& rng);

}  // namespace fewshot
