#pragma once

#include <cstdint>

#include "fewshot/data/dataset.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/config.hpp"

namespace fewshot {

/// Standard mini-batch supervised training of g(p(f(x))) on every source
/// class. The bundle head must have one output per source class. Learning
/// rate follows a per-step cosine schedule over all epochs.
TrainHistory pretrain_nonepisodic(ModelBundle& bundle, const LabeledDataset& source,
                                  const ParadigmConfig& config, std::uint64_t seed,
                                  const EpochCallback& on_epoch = {});

}  // namespace fewshot
