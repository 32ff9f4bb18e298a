#include "fewshot/harness/diagnostics.hpp"

#include <algorithm>

#include "fewshot/analysis/divergence.hpp"
#include "fewshot/common/rng.hpp"

namespace fewshot {

FeatureSample sample_features(const FeatureBank& bank, const LabeledDataset& dataset,
                              std::size_t count, std::uint64_t seed) {
  auto refs = dataset.all_items();
  if (count < refs.size()) {
    Rng rng(seed);
    rng.shuffle(std::span(refs));
    refs.resize(count);
    std::sort(refs.begin(), refs.end());
  }
  FeatureSample sample;
  sample.features = bank.rows(refs);
  sample.dataset = dataset.name();
  sample.labels.reserve(refs.size());
  for (const auto& r : refs) sample.labels.push_back(r.class_index);
  return sample;
}

Diagnostics compute_diagnostics(const FeatureBank& source_bank, const LabeledDataset& source,
                                const FeatureBank& target_bank, const LabeledDataset& target,
                                std::size_t subsample, std::uint64_t seed,
                                InterClassDistance inter) {
  Diagnostics d;
  d.subsample = std::min({subsample, source.total_items(), target.total_items()});
  const auto s = sample_features(source_bank, source, d.subsample, derive_seed(seed, "source"));
  const auto t = sample_features(target_bank, target, d.subsample, derive_seed(seed, "target"));
  d.kl = gaussian_kl(s, t);
  d.cluster = cluster_metrics(t, inter);
  return d;
}

}  // namespace fewshot
