#include "fewshot/paradigms/tune.hpp"

#include <cmath>

#include "fewshot/common/error.hpp"
#include "fewshot/model/head.hpp"
#include "fewshot/model/layers.hpp"
#include "fewshot/paradigms/metric.hpp"

namespace fewshot {

TuneResult tune_and_score(const Matrix& support, std::span<const std::size_t> support_labels,
                          const Matrix& query, std::span<const std::size_t> query_labels,
                          std::size_t way, const TuneConfig& config) {
  config.validate();
  if (support.rank() != 2 || query.rank() != 2 || support.dim(1) != query.dim(1)) {
    throw ShapeError("tune_and_score: support " + dims_to_string(support.dims()) + " and query " +
                     dims_to_string(query.dims()) + " widths differ");
  }
  const std::size_t d = support.dim(1);
  ClassifierHead head(HeadSpec{config.head, way, d, kCosineTemperature, HeadInit::zero});
  ParamGroup<double> params = head.init_params(0);
  if (config.head == HeadKind::cosine) {
    const Matrix protos = compute_prototypes(support, support_labels, way);
    auto& w = params.at("weight").value;
    std::copy(protos.values().begin(), protos.values().end(), w.begin());
  }

  TuneResult out;
  for (std::size_t step = 0; step < config.steps; ++step) {
    HeadTape<double> tape;
    const Matrix logits = head.forward(params, support, &tape);
    Matrix dlogits;
    out.support_loss = layers::softmax_cross_entropy(logits, support_labels, &dlogits);
    const auto grads = head.backward(params, tape, dlogits, static_cast<Matrix*>(nullptr));
    for (std::size_t i = 0; i < params.params.size(); ++i) {
      auto& w = params.params[i].value;
      const auto& g = grads.params[i].value;
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] -= config.lr * (g[j] + config.weight_decay * w[j]);
      }
    }
  }
  const Matrix support_logits = head.forward(params, support, static_cast<HeadTape<double>*>(nullptr));
  out.support_loss = layers::softmax_cross_entropy(support_logits, support_labels,
                                                   static_cast<Matrix*>(nullptr));
  out.support_accuracy = accuracy_of(support_logits, support_labels);
  const Matrix query_logits = head.forward(params, query, static_cast<HeadTape<double>*>(nullptr));
  out.query_accuracy = accuracy_of(query_logits, query_labels);
  return out;
}

double test_tune_and_eval(const ModelBundle& bundle, const LabeledDataset& target,
                          const Episode& episode, const TuneConfig& config) {
  const auto support = forward_eval(bundle, target.gather(episode.support_refs()));
  const auto query = forward_eval(bundle, target.gather(episode.query_refs()));
  return tune_and_score(support, episode.support_labels(), query, episode.query_labels(),
                        episode.way, config)
      .query_accuracy;
}

}  // namespace fewshot
