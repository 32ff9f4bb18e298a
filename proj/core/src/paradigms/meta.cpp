#include "fewshot/paradigms/meta.hpp"

#include <chrono>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"

namespace fewshot {

using layers::BatchNormMode;

bool adapts(InnerSubset subset, GroupId group) noexcept {
  switch (subset) {
    case InnerSubset::all: return true;
    case InnerSubset::head_only: return group == GroupId::omega;
    case InnerSubset::body_only: return group != GroupId::omega;
  }
  return false;
}

void mask_to_subset(ParamSet<double>& v, InnerSubset subset) {
  for (GroupId id : kAllGroups) {
    if (adapts(subset, id)) continue;
    for (auto& p : v.group(id).params) std::fill(p.value.begin(), p.value.end(), 0.0);
  }
}

namespace {

double inner_step(ParamSet<double>& p, const ObjectiveFn& support, const InnerLoop& loop) {
  Objective o = support(p);
  mask_to_subset(o.grad, loop.subset);
  axpy(p, -loop.lr, o.grad);
  return o.loss;
}

}  // namespace

std::vector<ParamSet<double>> inner_trajectory(const ParamSet<double>& start,
                                               const ObjectiveFn& support, const InnerLoop& loop) {
  std::vector<ParamSet<double>> path{start};
  path.reserve(loop.steps + 1);
  for (std::size_t k = 0; k < loop.steps; ++k) {
    ParamSet<double> next = path.back();
    inner_step(next, support, loop);
    path.push_back(std::move(next));
  }
  return path;
}

MetaGradient meta_gradient(const ParamSet<double>& start, const ObjectiveFn& support,
                           const ObjectiveFn& query, const HvpFn& hvp, const InnerLoop& loop) {
  MetaGradient out;
  std::vector<ParamSet<double>> path{start};
  ParamSet<double> p = start;
  for (std::size_t k = 0; k < loop.steps; ++k) {
    const double loss = inner_step(p, support, loop);
    if (k == 0) out.support_loss = loss;
    if (hvp) path.push_back(p);
  }
  Objective q = query(p);
  out.query_loss = q.loss;
  out.grad = std::move(q.grad);
  if (!hvp) return out;
  for (std::size_t k = loop.steps; k-- > 0;) {
    ParamSet<double> masked = out.grad;
    mask_to_subset(masked, loop.subset);
    const ParamSet<double> hv = hvp(path[k], masked);
    axpy(out.grad, -loop.lr, hv);
  }
  return out;
}

ObjectiveFn support_objective(const ModelBundle& arch, const Tensor<double>& images,
                              std::vector<std::size_t> labels) {
  return [&arch, &images, labels = std::move(labels)](const ParamSet<double>& p) {
    auto r = classification_loss<double>(arch, p, BatchNormMode::batch_stats, nullptr, images, labels);
    return Objective{r.loss, std::move(r.grads)};
  };
}

HvpFn support_hvp(const ModelBundle& arch, const Tensor<double>& images,
                  std::vector<std::size_t> labels) {
  std::vector<Dual> lifted(images.size());
  for (std::size_t i = 0; i < lifted.size(); ++i) lifted[i] = Dual{images.data()[i], 0.0};
  return [&arch, dual_images = Tensor<Dual>(images.dims(), std::move(lifted)),
          labels = std::move(labels)](const ParamSet<double>& at, const ParamSet<double>& dir) {
    auto r = classification_loss<Dual>(arch, make_dual(at, dir), BatchNormMode::batch_stats,
                                       nullptr, dual_images, labels);
    return tangent_part(r.grads);
  };
}

InnerLoop inner_loop_of(const ParadigmConfig& config) {
  return {config.inner_lr, config.inner_steps, config.inner_subset};
}

ParamSet<double> meta_inner_adapt(const ModelBundle& bundle, const Tensor<double>& support_images,
                                  std::span<const std::size_t> support_labels,
                                  const ParadigmConfig& config) {
  const auto support = support_objective(
      bundle, support_images, {support_labels.begin(), support_labels.end()});
  return inner_trajectory(bundle.params, support, inner_loop_of(config)).back();
}

MetaStepResult meta_outer_step(ModelBundle& bundle, const LabeledDataset& source,
                               std::span<const Episode> episodes, const ParadigmConfig& config,
                               SgdMomentum& optimizer, double lr) {
  if (episodes.empty()) throw ConfigError("meta_outer_step: empty meta-batch");
  MetaStepResult out;
  out.meta_grad = zeros_like(bundle.params);
  const double scale = 1.0 / static_cast<double>(episodes.size());
  const InnerLoop loop = inner_loop_of(config);
  for (const Episode& ep : episodes) {
    if (ep.way != bundle.head.num_classes) {
      throw ConfigError("episode way " + std::to_string(ep.way) + " does not match the " +
                        std::to_string(bundle.head.num_classes) + "-way classifier");
    }
    const auto support_images = source.gather(ep.support_refs());
    const auto query_images = source.gather(ep.query_refs());
    const auto query_labels = ep.query_labels();
    const auto support = support_objective(bundle, support_images, ep.support_labels());
    HvpFn hvp;
    if (config.second_order) hvp = support_hvp(bundle, support_images, ep.support_labels());
    double accuracy = 0.0;
    const ObjectiveFn query = [&](const ParamSet<double>& p) {
      auto r = classification_loss<double>(bundle, p, BatchNormMode::batch_stats_update,
                                           &bundle.buffers, query_images, query_labels);
      accuracy = accuracy_of(r.logits, query_labels);
      return Objective{r.loss, std::move(r.grads)};
    };
    const MetaGradient g = meta_gradient(bundle.params, support, query, hvp, loop);
    axpy(out.meta_grad, scale, g.grad);
    out.query_loss += scale * g.query_loss;
    out.support_loss += scale * g.support_loss;
    out.query_accuracy += scale * accuracy;
  }
  optimizer.step(bundle.params, out.meta_grad, lr);
  return out;
}

TrainHistory train_meta(ModelBundle& bundle, const LabeledDataset& source,
                        const ParadigmConfig& config, std::uint64_t seed,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (bundle.head.num_classes != config.train_way) {
    throw ConfigError("meta training needs a " + std::to_string(config.train_way) +
                      "-way classifier, model has " + std::to_string(bundle.head.num_classes));
  }
  if (bundle.backbone.input != source.shape()) {
    throw ShapeError("model input " + to_string(bundle.backbone.input) + " does not match dataset " +
                     to_string(source.shape()));
  }
  const std::size_t steps_per_epoch =
      (config.episodes_per_epoch + config.meta_batch - 1) / config.meta_batch;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  SgdMomentum opt({config.momentum, config.weight_decay});
  TrainHistory history;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    double lr = 0.0;
    std::size_t drawn = 0;
    while (drawn < config.episodes_per_epoch) {
      const std::size_t m = std::min(config.meta_batch, config.episodes_per_epoch - drawn);
      std::vector<Episode> batch;
      for (std::size_t i = 0; i < m; ++i, ++drawn) {
        Rng rng(derive_seed(seed, "episode", {epoch, drawn}));
        batch.push_back(sample_episode(source, config.train_way, config.train_shot,
                                       config.train_query, rng));
      }
      lr = cosine_lr(config.outer_lr, step, total_steps);
      const auto r = meta_outer_step(bundle, source, batch, config, opt, lr);
      if (step == 0) history.initial_loss = r.query_loss;
      loss_sum += r.query_loss * static_cast<double>(m);
      acc_sum += r.query_accuracy * static_cast<double>(m);
      ++step;
    }
    const double n = static_cast<double>(config.episodes_per_epoch);
    history.loss.push_back(loss_sum / n);
    history.accuracy.push_back(acc_sum / n);
    ++bundle.epoch;
    if (on_epoch) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      on_epoch({epoch, history.loss.back(), history.accuracy.back(), lr, wall.count()});
    }
  }
  return history;
}

}  // namespace fewshot
