#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fewshot/data/dataset.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/model/optimizer.hpp"
#include "fewshot/paradigms/config.hpp"

namespace fewshot {

struct Objective {
  double loss = 0.0;
  ParamSet<double> grad;
};

/// Loss and gradient at a parameter point.
using ObjectiveFn = std::function<Objective(const ParamSet<double>&)>;
/// Hessian of the support loss at `at` applied to `direction`.
using HvpFn = std::function<ParamSet<double>(const ParamSet<double>& at,
                                              const ParamSet<double>& direction)>;

struct InnerLoop {
  double lr = 0.01;
  std::size_t steps = 1;
  InnerSubset subset = InnerSubset::all;
};

[[nodiscard]] bool adapts(InnerSubset subset, GroupId group) noexcept;

/// Zeroes every group the inner loop does not adapt.
void mask_to_subset(ParamSet<double>& v, InnerSubset subset);

/// Inner gradient steps on the support objective. Returns the trajectory
/// [start, after step 1, ..., after step K]; groups outside the subset stay
/// fixed.
std::vector<ParamSet<double>> inner_trajectory(const ParamSet<double>& start,
                                               const ObjectiveFn& support, const InnerLoop& loop);

struct MetaGradient {
  double query_loss = 0.0;    ///< query loss at the adapted parameters
  double support_loss = 0.0;  ///< support loss before adaptation
  ParamSet<double> grad;      ///< d(query loss after adaptation) / d(start)
};

/// Gradient of L_query(adapt(start)) with respect to start. Without `hvp`
/// the first-order approximation grad L_query(adapted) is returned; with it
/// the exact gradient is obtained by back-propagating through every inner
/// step: v <- v - lr * H_support(p_k) * mask(v), for k = K-1 .. 0.
MetaGradient meta_gradient(const ParamSet<double>& start, const ObjectiveFn& support,
                           const ObjectiveFn& query, const HvpFn& hvp, const InnerLoop& loop);

/// Support objective of the model on fixed images (batch statistics, running
/// statistics untouched).
ObjectiveFn support_objective(const ModelBundle& arch, const Tensor<double>& images,
                              std::vector<std::size_t> labels);

/// Exact Hessian-vector product of the support objective by forward-mode
/// differentiation of the analytic gradient.
HvpFn support_hvp(const ModelBundle& arch, const Tensor<double>& images,
                  std::vector<std::size_t> labels);

InnerLoop inner_loop_of(const ParadigmConfig& config);

/// Adapted parameters after the inner loop on one support set.
ParamSet<double> meta_inner_adapt(const ModelBundle& bundle, const Tensor<double>& support_images,
                                  std::span<const std::size_t> support_labels,
                                  const ParadigmConfig& config);

struct MetaStepResult {
  double query_loss = 0.0;      ///< mean over the meta-batch, after adaptation
  double query_accuracy = 0.0;  ///< mean over the meta-batch, after adaptation
  double support_loss = 0.0;    ///< mean over the meta-batch, before adaptation
  ParamSet<double> meta_grad;   ///< averaged meta-gradient that was applied
};

/// One outer update from a meta-batch of episodes. Query forward passes
/// update the running statistics once per episode.
MetaStepResult meta_outer_step(ModelBundle& bundle, const LabeledDataset& source,
                               std::span<const Episode> episodes, const ParadigmConfig& config,
                               SgdMomentum& optimizer, double lr);

/// Bilevel training over sampled source episodes. The head must have
/// train_way outputs.
TrainHistory train_meta(ModelBundle& bundle, const LabeledDataset& source,
                        const ParadigmConfig& config, std::uint64_t seed,
                        const EpochCallback& on_epoch = {});

}  // namespace fewshot
