#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fewshot/analysis/accuracy.hpp"
#include "fewshot/data/dataset.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/config.hpp"

namespace fewshot {

enum class EvalMethod { tune, proto };

std::string to_string(EvalMethod m);
EvalMethod parse_eval_method(std::string_view text);

struct EvalSpec {
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t query = 15;
  std::size_t episodes = 600;
  EvalMethod method = EvalMethod::tune;
  TuneConfig tune;
  DistanceKind distance = DistanceKind::sq_euclidean;
  std::size_t threads = 0;  ///< 0 = hardware concurrency

  void validate() const;
};

/// forward_eval over `refs` in fixed-size chunks. Evaluation mode uses
/// running statistics, so each row depends only on its own image.
Matrix extract_features(const ModelBundle& bundle, const LabeledDataset& dataset,
                        std::span<const ItemRef> refs, std::size_t chunk = 128);

/// Evaluation-mode features of every item of a dataset, addressable by ItemRef.
class FeatureBank {
 public:
  FeatureBank(const ModelBundle& bundle, const LabeledDataset& dataset);

  [[nodiscard]] const Matrix& features() const noexcept { return features_; }
  [[nodiscard]] std::size_t dim() const { return features_.dim(1); }
  [[nodiscard]] std::size_t row_of(const ItemRef& ref) const {
    return offsets_.at(ref.class_index) + ref.item_index;
  }
  [[nodiscard]] Matrix rows(std::span<const ItemRef> refs) const;

 private:
  Matrix features_;
  std::vector<std::size_t> offsets_;
};

struct EvalResult {
  std::vector<double> accuracies;  ///< per episode, in episode order
  AccuracySummary summary;
};

/// Episode i is drawn from an rng seeded with derive_seed(seed, "episode", {i}),
/// so results do not depend on the thread count.
EvalResult evaluate_episodes(const FeatureBank& bank, const LabeledDataset& dataset,
                             const EvalSpec& spec, std::uint64_t seed);

EvalResult evaluate_episodes(const ModelBundle& bundle, const LabeledDataset& dataset,
                             const EvalSpec& spec, std::uint64_t seed);

/// The episode evaluate_episodes uses at index i.
Episode evaluation_episode(const LabeledDataset& dataset, const EvalSpec& spec, std::uint64_t seed,
                           std::size_t index);

}  // namespace fewshot
