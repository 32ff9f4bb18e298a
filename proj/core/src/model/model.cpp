#include "fewshot/model/model.hpp"

#include "fewshot/common/rng.hpp"

namespace fewshot {

using layers::BatchNormMode;

ModelBundle create_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.backbone.validate();
  ModelBundle b;
  b.backbone = spec.backbone;
  b.projector = spec.projector;
  b.projector.feature_dim = spec.backbone.feature_dim();
  b.head = HeadSpec{spec.head_kind, spec.num_classes, b.projector.feature_dim, kCosineTemperature,
                    spec.head_init};
  b.seed = seed;
  Backbone backbone(b.backbone);
  Projector projector(b.projector);
  ClassifierHead head(b.head);
  b.params.theta = backbone.init_params(derive_seed(seed, "theta"));
  b.params.epsilon = projector.init_params(derive_seed(seed, "epsilon"));
  b.params.omega = head.init_params(derive_seed(seed, "omega"));
  b.buffers.theta = backbone.init_buffers();
  b.buffers.epsilon = projector.init_buffers();
  return b;
}

void reset_head(ModelBundle& bundle, const HeadSpec& head, std::uint64_t seed) {
  bundle.head = head;
  bundle.head.feature_dim = bundle.feature_dim();
  bundle.params.omega = ClassifierHead(bundle.head).init_params(seed);
}

template <typename T>
Tensor<T> embed(const ModelBundle& arch, const ParamSet<T>& params, BatchNormMode mode,
                BufferSet* update, const Tensor<T>& images, EmbedTape<T>* tape) {
  const bool updating = mode == BatchNormMode::batch_stats_update;
  if (updating && update == nullptr) {
    throw ConfigError("embed: running statistics target required when updating");
  }
  Backbone backbone(arch.backbone);
  Projector projector(arch.projector);
  auto features = backbone.forward(
      params.theta, mode, RunningStats{&arch.buffers.theta, updating ? &update->theta : nullptr},
      images, tape ? &tape->backbone : nullptr);
  return projector.forward(
      params.epsilon, mode,
      RunningStats{&arch.buffers.epsilon, updating ? &update->epsilon : nullptr}, features,
      tape ? &tape->projector : nullptr);
}

template <typename T>
void embed_backward(const ModelBundle& arch, const ParamSet<T>& params, const EmbedTape<T>& tape,
                    const Tensor<T>& grad_embedding, ParamSet<T>& grads) {
  Backbone backbone(arch.backbone);
  Projector projector(arch.projector);
  Tensor<T> grad_features;
  grads.epsilon = projector.backward(params.epsilon, tape.projector, grad_embedding, &grad_features);
  grads.theta = backbone.backward(params.theta, tape.backbone, grad_features);
}

template <typename T>
LossResult<T> classification_loss(const ModelBundle& arch, const ParamSet<T>& params,
                                  BatchNormMode mode, BufferSet* update, const Tensor<T>& images,
                                  std::span<const std::size_t> labels, bool with_grad) {
  ClassifierHead head(arch.head);
  EmbedTape<T> tape;
  HeadTape<T> head_tape;
  auto embedded = embed(arch, params, mode, update, images, with_grad ? &tape : nullptr);
  LossResult<T> out;
  out.logits = head.forward(params.omega, embedded, with_grad ? &head_tape : nullptr);
  Tensor<T> dlogits;
  out.loss = layers::softmax_cross_entropy(out.logits, labels, with_grad ? &dlogits : nullptr);
  if (!with_grad) return out;
  Tensor<T> grad_embedding;
  out.grads.omega = head.backward(params.omega, head_tape, dlogits, &grad_embedding);
  embed_backward(arch, params, tape, grad_embedding, out.grads);
  return out;
}

Tensor<double> forward_train(ModelBundle& bundle, const Tensor<double>& images) {
  ClassifierHead head(bundle.head);
  auto embedded = embed(bundle, bundle.params, BatchNormMode::batch_stats_update, &bundle.buffers,
                        images, static_cast<EmbedTape<double>*>(nullptr));
  return head.forward(bundle.params.omega, embedded, static_cast<HeadTape<double>*>(nullptr));
}

Tensor<double> forward_eval(const ModelBundle& bundle, const Tensor<double>& images) {
  Backbone backbone(bundle.backbone);
  return backbone.forward(bundle.params.theta, BatchNormMode::running_stats,
                          RunningStats{&bundle.buffers.theta, nullptr}, images,
                          static_cast<BackboneTape<double>*>(nullptr));
}

double accuracy_of(const Tensor<double>& logits, std::span<const std::size_t> labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    if (layers::argmax(logits.row(r)) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

#define FEWSHOT_INSTANTIATE_MODEL(T)                                                           \
  template Tensor<T> embed<T>(const ModelBundle&, const ParamSet<T>&, BatchNormMode,          \
                              BufferSet*, const Tensor<T>&, EmbedTape<T>*);                   \
  template void embed_backward<T>(const ModelBundle&, const ParamSet<T>&, const EmbedTape<T>&, \
                                  const Tensor<T>&, ParamSet<T>&);                            \
  template LossResult<T> classification_loss<T>(const ModelBundle&, const ParamSet<T>&,       \
                                                BatchNormMode, BufferSet*, const Tensor<T>&,  \
                                                std::span<const std::size_t>, bool);

FEWSHOT_INSTANTIATE_MODEL(double)
FEWSHOT_INSTANTIATE_MODEL(Dual)

#undef FEWSHOT_INSTANTIATE_MODEL

}  // namespace fewshot
