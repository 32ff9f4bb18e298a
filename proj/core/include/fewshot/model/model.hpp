#pragma once

#include <cstdint>
#include <span>

#include "fewshot/model/backbone.hpp"
#include "fewshot/model/head.hpp"
#include "fewshot/model/projector.hpp"

namespace fewshot {

/// Batch-norm running statistics for the extractor and the projector.
struct BufferSet {
  ParamGroup<double> theta;
  ParamGroup<double> epsilon;

  friend bool operator==(const BufferSet&, const BufferSet&) = default;
};

/// Architecture plus the three disjoint parameter groups theta (extractor),
/// epsilon (projector) and omega (classifier).
struct ModelBundle {
  BackboneSpec backbone;
  ProjectorConfig projector;
  HeadSpec head;
  ParamSet<double> params;
  BufferSet buffers;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;

  [[nodiscard]] std::size_t feature_dim() const { return backbone.feature_dim(); }
};

struct ModelSpec {
  BackboneSpec backbone;
  /// Only the flags are used; the width is taken from the backbone.
  ProjectorConfig projector;
  HeadKind head_kind = HeadKind::linear;
  std::size_t num_classes = 0;
  HeadInit head_init = HeadInit::zero;
};

/// Each group draws from its own derived seed, so the extractor weights do
/// not depend on the projector or head configuration.
ModelBundle create_model(const ModelSpec& spec, std::uint64_t seed);

/// Replaces omega with a freshly initialized head.
void reset_head(ModelBundle& bundle, const HeadSpec& head, std::uint64_t seed);

/// g(p(f(x))) in training mode: batch statistics, running statistics updated.
/// Returns logits (n, num_classes).
Tensor<double> forward_train(ModelBundle& bundle, const Tensor<double>& images);

/// f(x) in evaluation mode: running statistics, projector and classifier
/// bypassed. Returns features (n, feature_dim).
Tensor<double> forward_eval(const ModelBundle& bundle, const Tensor<double>& images);

template <typename T>
struct EmbedTape {
  BackboneTape<T> backbone;
  ProjectorTape<T> projector;
};

/// p(f(x)) with explicit parameters. `update` receives running-statistic
/// updates in batch_stats_update mode; it is ignored otherwise.
template <typename T>
Tensor<T> embed(const ModelBundle& arch, const ParamSet<T>& params, layers::BatchNormMode mode,
                BufferSet* update, const Tensor<T>& images, EmbedTape<T>* tape);

/// Accumulates theta and epsilon gradients for d(loss)/d(embedding).
template <typename T>
void embed_backward(const ModelBundle& arch, const ParamSet<T>& params, const EmbedTape<T>& tape,
                    const Tensor<T>& grad_embedding, ParamSet<T>& grads);

template <typename T>
struct LossResult {
  T loss{};
  ParamSet<T> grads;
  Tensor<T> logits;
};

/// Mean cross-entropy of g(p(f(images))) against labels, with gradients for
/// all three groups.
template <typename T>
LossResult<T> classification_loss(const ModelBundle& arch, const ParamSet<T>& params,
                                  layers::BatchNormMode mode, BufferSet* update,
                                  const Tensor<T>& images, std::span<const std::size_t> labels,
                                  bool with_grad = true);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy_of(const Tensor<double>& logits, std::span<const std::size_t> labels);

}  // namespace fewshot
