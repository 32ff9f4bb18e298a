#pragma once

#include <cstddef>
#include <span>

#include "fewshot/data/dataset.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/config.hpp"

namespace fewshot {

struct TuneResult {
  double query_accuracy = 0.0;
  double support_accuracy = 0.0;
  double support_loss = 0.0;  ///< after the last step
};

/// Fits a fresh head on frozen support features with full-batch gradient
/// descent plus L2 decay, then scores the query features. The linear head
/// starts at zero; the cosine head starts from the support class means.
TuneResult tune_and_score(const Matrix& support, std::span<const std::size_t> support_labels,
                          const Matrix& query, std::span<const std::size_t> query_labels,
                          std::size_t way, const TuneConfig& config);

/// Query accuracy of a head tuned on f(support) of one target episode.
/// Features come from forward_eval, so the projector and the training head
/// never take part.
double test_tune_and_eval(const ModelBundle& bundle, const LabeledDataset& target,
                          const Episode& episode, const TuneConfig& config);

}  // namespace fewshot
