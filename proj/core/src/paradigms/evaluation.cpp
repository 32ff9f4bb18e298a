#include "fewshot/paradigms/evaluation.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/paradigms/metric.hpp"
#include "fewshot/paradigms/tune.hpp"

namespace fewshot {

std::string to_string(EvalMethod m) { return m == EvalMethod::tune ? "tune" : "proto"; }

EvalMethod parse_eval_method(std::string_view text) {
  if (text == "tune") return EvalMethod::tune;
  if (text == "proto") return EvalMethod::proto;
  throw ConfigError("unknown evaluation method '" + std::string(text) +
                    "' (expected tune or proto)");
}

void EvalSpec::validate() const {
  if (way < 2) throw ConfigError("evaluation way must be >= 2");
  if (shot == 0) throw ConfigError("evaluation shot must be >= 1");
  if (query == 0) throw ConfigError("evaluation query must be >= 1");
  if (episodes == 0) throw ConfigError("evaluation episodes must be >= 1");
  if (method == EvalMethod::tune) tune.validate();
}

Matrix extract_features(const ModelBundle& bundle, const LabeledDataset& dataset,
                        std::span<const ItemRef> refs, std::size_t chunk) {
  const std::size_t d = bundle.feature_dim();
  Matrix out({refs.size(), d});
  for (std::size_t start = 0; start < refs.size(); start += chunk) {
    const auto part = refs.subspan(start, std::min(chunk, refs.size() - start));
    const Matrix f = forward_eval(bundle, dataset.gather(part));
    std::copy(f.values().begin(), f.values().end(), out.data() + start * d);
  }
  return out;
}

FeatureBank::FeatureBank(const ModelBundle& bundle, const LabeledDataset& dataset) {
  if (bundle.backbone.input != dataset.shape()) {
    throw ShapeError("model input " + to_string(bundle.backbone.input) + " does not match dataset '" +
                     dataset.name() + "' " + to_string(dataset.shape()));
  }
  std::size_t offset = 0;
  for (std::size_t c = 0; c < dataset.class_count(); ++c) {
    offsets_.push_back(offset);
    offset += dataset.items_in_class(c);
  }
  const auto refs = dataset.all_items();
  features_ = extract_features(bundle, dataset, refs);
}

Matrix FeatureBank::rows(std::span<const ItemRef> refs) const {
  const std::size_t d = dim();
  Matrix out({refs.size(), d});
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto src = features_.row(row_of(refs[i]));
    std::copy(src.begin(), src.end(), out.data() + i * d);
  }
  return out;
}

Episode evaluation_episode(const LabeledDataset& dataset, const EvalSpec& spec, std::uint64_t seed,
                           std::size_t index) {
  Rng rng(derive_seed(seed, "episode", {index}));
  return sample_episode(dataset, spec.way, spec.shot, spec.query, rng);
}

namespace {

double score_episode(const FeatureBank& bank, const Episode& ep, const EvalSpec& spec) {
  const Matrix support = bank.rows(ep.support_refs());
  const Matrix query = bank.rows(ep.query_refs());
  const auto sl = ep.support_labels();
  const auto ql = ep.query_labels();
  if (spec.method == EvalMethod::tune) {
    return tune_and_score(support, sl, query, ql, ep.way, spec.tune).query_accuracy;
  }
  const auto predicted =
      predicted_labels(proto_predict(query, compute_prototypes(support, sl, ep.way), spec.distance));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ql.size(); ++i) correct += predicted[i] == ql[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ql.size());
}

}  // namespace

EvalResult evaluate_episodes(const FeatureBank& bank, const LabeledDataset& dataset,
                             const EvalSpec& spec, std::uint64_t seed) {
  spec.validate();
  // Surface sampling errors (too few classes or items) before spawning workers.
  (void)evaluation_episode(dataset, spec, seed, 0);

  EvalResult result;
  result.accuracies.assign(spec.episodes, 0.0);
  std::size_t threads = spec.threads != 0 ? spec.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, spec.episodes);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](std::size_t first, std::size_t stride) {
    try {
      for (std::size_t i = first; i < spec.episodes; i += stride) {
        result.accuracies[i] = score_episode(bank, evaluation_episode(dataset, spec, seed, i), spec);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  if (failure) std::rethrow_exception(failure);
  result.summary = aggregate_accuracy(result.accuracies);
  return result;
}

EvalResult evaluate_episodes(const ModelBundle& bundle, const LabeledDataset& dataset,
                             const EvalSpec& spec, std::uint64_t seed) {
  spec.validate();
  const FeatureBank bank(bundle, dataset);
  return evaluate_episodes(bank, dataset, spec, seed);
}

}  // namespace fewshot
