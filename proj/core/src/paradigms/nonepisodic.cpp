#include "fewshot/paradigms/nonepisodic.hpp"

#include <chrono>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/model/optimizer.hpp"

namespace fewshot {

TrainHistory pretrain_nonepisodic(ModelBundle& bundle, const LabeledDataset& source,
                                  const ParadigmConfig& config, std::uint64_t seed,
                                  const EpochCallback& on_epoch) {
  config.validate();
  if (bundle.head.num_classes != source.class_count()) {
    throw ConfigError("classifier has " + std::to_string(bundle.head.num_classes) +
                      " outputs but source dataset '" + source.name() + "' has " +
                      std::to_string(source.class_count()) + " classes");
  }
  if (bundle.backbone.input != source.shape()) {
    throw ShapeError("model input " + to_string(bundle.backbone.input) + " does not match dataset " +
                     to_string(source.shape()));
  }

  const std::size_t n = source.total_items();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;

  SgdMomentum opt({config.momentum, config.weight_decay});
  TrainHistory history;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(derive_seed(seed, "epoch", {epoch}));
    double loss_sum = 0.0;
    double correct = 0.0;
    double lr = 0.0;
    for (const Batch& batch : sample_batches(source, config.batch_size, rng)) {
      const auto images = source.gather(batch.items);
      auto result = classification_loss<double>(bundle, bundle.params,
                                                 layers::BatchNormMode::batch_stats_update,
                                                 &bundle.buffers, images, batch.labels);
      if (step == 0) history.initial_loss = result.loss;
      const double m = static_cast<double>(batch.labels.size());
      loss_sum += result.loss * m;
      correct += accuracy_of(result.logits, batch.labels) * m;
      lr = cosine_lr(config.outer_lr, step, total_steps);
      opt.step(bundle.params, result.grads, lr);
      ++step;
    }
    history.loss.push_back(loss_sum / static_cast<double>(n));
    history.accuracy.push_back(correct / static_cast<double>(n));
    ++bundle.epoch;
    if (on_epoch) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      on_epoch({epoch, history.loss.back(), history.accuracy.back(), lr, wall.count()});
    }
  }
  return history;
}

}  // namespace fewshot
