#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fewshot/data/dataset.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/config.hpp"

namespace fewshot {

/// Per-class means of support embeddings: (way, d). Throws DataError when a
/// class in [0, way) has no support item.
Matrix compute_prototypes(const Matrix& support, std::span<const std::size_t> labels,
                          std::size_t way);

/// (q, way) distances. sq_euclidean is |x - c|^2; cosine is 1 - cos(x, c)
/// with norms smoothed as in the cosine head.
Matrix prototype_distances(const Matrix& queries, const Matrix& prototypes, DistanceKind kind);

/// Row-wise softmax over negative distances: (q, way) class probabilities.
Matrix proto_predict(const Matrix& queries, const Matrix& prototypes, DistanceKind kind);

/// Argmax per row, lowest class index on ties.
std::vector<std::size_t> predicted_labels(const Matrix& scores);

struct ProtoLoss {
  double loss = 0.0;
  double accuracy = 0.0;
  Matrix grad_support;  ///< d loss / d support embeddings
  Matrix grad_query;    ///< d loss / d query embeddings
};

/// Mean cross-entropy of the prototype classifier on the query set, with
/// gradients flowing through both the prototypes and the queries.
ProtoLoss prototype_loss(const Matrix& support, std::span<const std::size_t> support_labels,
                         const Matrix& query, std::span<const std::size_t> query_labels,
                         std::size_t way, DistanceKind kind);

/// Episodic training of f (and p when enabled) with the prototype loss. The
/// classifier group is left untouched.
TrainHistory train_metric(ModelBundle& bundle, const LabeledDataset& source,
                          const ParadigmConfig& config, std::uint64_t seed,
                          const EpochCallback& on_epoch = {});

}  // namespace fewshot
