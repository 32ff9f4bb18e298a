#include "fewshot/paradigms/metric.hpp"

#include <chrono>
#include <cmath>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/model/layers.hpp"
#include "fewshot/model/optimizer.hpp"

namespace fewshot {

namespace {

constexpr double kNormSmoothing = 1e-12;

double smoothed_norm(std::span<const double> v) {
  double s = kNormSmoothing;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Matrix normalized_rows(const Matrix& m, std::vector<double>& norms) {
  Matrix out(m.dims());
  norms.resize(m.dim(0));
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    norms[r] = smoothed_norm(m.row(r));
    for (std::size_t j = 0; j < m.dim(1); ++j) out(r, j) = m(r, j) / norms[r];
  }
  return out;
}

// Gradient through u = v / sqrt(|v|^2 + s): (g - u (u . g)) / n.
void normalize_backward(const Matrix& unit, const std::vector<double>& norms, Matrix& grad) {
  for (std::size_t r = 0; r < grad.dim(0); ++r) {
    double ug = 0.0;
    for (std::size_t j = 0; j < grad.dim(1); ++j) ug += unit(r, j) * grad(r, j);
    for (std::size_t j = 0; j < grad.dim(1); ++j) {
      grad(r, j) = (grad(r, j) - unit(r, j) * ug) / norms[r];
    }
  }
}

void check_pair(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError(std::string(what) + ": embedding widths differ (" + dims_to_string(a.dims()) +
                     " vs " + dims_to_string(b.dims()) + ")");
  }
}

}  // namespace

Matrix compute_prototypes(const Matrix& support, std::span<const std::size_t> labels,
                          std::size_t way) {
  if (support.rank() != 2 || support.dim(0) != labels.size()) {
    throw ShapeError("compute_prototypes: " + std::to_string(labels.size()) + " labels for " +
                     dims_to_string(support.dims()) + " support embeddings");
  }
  const std::size_t d = support.dim(1);
  Matrix protos({way, d});
  std::vector<std::size_t> counts(way, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= way) {
      throw DataError("support label " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(way) + ")");
    }
    ++counts[labels[i]];
    for (std::size_t j = 0; j < d; ++j) protos(labels[i], j) += support(i, j);
  }
  for (std::size_t c = 0; c < way; ++c) {
    if (counts[c] == 0) {
      throw DataError("class " + std::to_string(c) + " has no support examples");
    }
    for (std::size_t j = 0; j < d; ++j) protos(c, j) /= static_cast<double>(counts[c]);
  }
  return protos;
}

Matrix prototype_distances(const Matrix& queries, const Matrix& prototypes, DistanceKind kind) {
  check_pair(queries, prototypes, "prototype_distances");
  const std::size_t q = queries.dim(0);
  const std::size_t w = prototypes.dim(0);
  const std::size_t d = queries.dim(1);
  Matrix out({q, w});
  if (kind == DistanceKind::sq_euclidean) {
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t c = 0; c < w; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = queries(i, j) - prototypes(c, j);
          s += diff * diff;
        }
        out(i, c) = s;
      }
    }
    return out;
  }
  std::vector<double> qn;
  std::vector<double> pn;
  const Matrix qu = normalized_rows(queries, qn);
  const Matrix pu = normalized_rows(prototypes, pn);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += qu(i, j) * pu(c, j);
      out(i, c) = 1.0 - s;
    }
  }
  return out;
}

Matrix proto_predict(const Matrix& queries, const Matrix& prototypes, DistanceKind kind) {
  Matrix logits = prototype_distances(queries, prototypes, kind);
  for (double& v : logits.values()) v = -v;
  return layers::softmax_rows(logits);
}

std::vector<std::size_t> predicted_labels(const Matrix& scores) {
  std::vector<std::size_t> out(scores.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = layers::argmax(scores.row(r));
  return out;
}

ProtoLoss prototype_loss(const Matrix& support, std::span<const std::size_t> support_labels,
                         const Matrix& query, std::span<const std::size_t> query_labels,
                         std::size_t way, DistanceKind kind) {
  check_pair(support, query, "prototype_loss");
  if (query.dim(0) != query_labels.size()) {
    throw ShapeError("prototype_loss: " + std::to_string(query_labels.size()) + " labels for " +
                     std::to_string(query.dim(0)) + " queries");
  }
  const Matrix protos = compute_prototypes(support, support_labels, way);
  const std::size_t q = query.dim(0);
  const std::size_t d = query.dim(1);

  Matrix logits = prototype_distances(query, protos, kind);
  for (double& v : logits.values()) v = -v;
  Matrix dlogits;
  ProtoLoss out;
  out.loss = layers::softmax_cross_entropy(logits, query_labels, &dlogits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < q; ++i) {
    if (layers::argmax(logits.row(i)) == query_labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(q);

  out.grad_query = Matrix({q, d});
  Matrix grad_protos({way, d});
  if (kind == DistanceKind::sq_euclidean) {
    // logit = -|x - c|^2
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t c = 0; c < way; ++c) {
        const double g = dlogits(i, c);
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = query(i, j) - protos(c, j);
          out.grad_query(i, j) -= 2.0 * g * diff;
          grad_protos(c, j) += 2.0 * g * diff;
        }
      }
    }
  } else {
    // logit = cos(x, c) - 1
    std::vector<double> qn;
    std::vector<double> pn;
    const Matrix qu = normalized_rows(query, qn);
    const Matrix pu = normalized_rows(protos, pn);
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t c = 0; c < way; ++c) {
        const double g = dlogits(i, c);
        for (std::size_t j = 0; j < d; ++j) {
          out.grad_query(i, j) += g * pu(c, j);
          grad_protos(c, j) += g * qu(i, j);
        }
      }
    }
    normalize_backward(qu, qn, out.grad_query);
    normalize_backward(pu, pn, grad_protos);
  }

  std::vector<double> counts(way, 0.0);
  for (std::size_t label : support_labels) counts[label] += 1.0;
  out.grad_support = Matrix(support.dims());
  for (std::size_t i = 0; i < support_labels.size(); ++i) {
    const std::size_t c = support_labels[i];
    for (std::size_t j = 0; j < d; ++j) out.grad_support(i, j) = grad_protos(c, j) / counts[c];
  }
  return out;
}

TrainHistory train_metric(ModelBundle& bundle, const LabeledDataset& source,
                          const ParadigmConfig& config, std::uint64_t seed,
                          const EpochCallback& on_epoch) {
  config.validate();
  if (bundle.backbone.input != source.shape()) {
    throw ShapeError("model input " + to_string(bundle.backbone.input) + " does not match dataset " +
                     to_string(source.shape()));
  }
  const std::size_t total_steps = config.episodes_per_epoch * config.epochs;
  SgdMomentum opt({config.momentum, config.weight_decay});
  TrainHistory history;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    double lr = 0.0;
    for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
      Rng rng(derive_seed(seed, "episode", {epoch, e}));
      const Episode ep =
          sample_episode(source, config.train_way, config.train_shot, config.train_query, rng);
      auto refs = ep.support_refs();
      const auto query_refs = ep.query_refs();
      refs.insert(refs.end(), query_refs.begin(), query_refs.end());
      const auto images = source.gather(refs);

      EmbedTape<double> tape;
      const Matrix emb = embed<double>(bundle, bundle.params,
                                       layers::BatchNormMode::batch_stats_update, &bundle.buffers,
                                       images, &tape);
      const std::size_t ns = ep.support.size();
      const std::size_t d = emb.dim(1);
      Matrix s({ns, d});
      Matrix qm({query_refs.size(), d});
      std::copy_n(emb.data(), ns * d, s.data());
      std::copy_n(emb.data() + ns * d, qm.size(), qm.data());

      const auto sl = ep.support_labels();
      const auto ql = ep.query_labels();
      const ProtoLoss pl = prototype_loss(s, sl, qm, ql, ep.way, config.distance);
      if (step == 0) history.initial_loss = pl.loss;
      loss_sum += pl.loss;
      acc_sum += pl.accuracy;

      Matrix grad_emb(emb.dims());
      std::copy_n(pl.grad_support.data(), pl.grad_support.size(), grad_emb.data());
      std::copy_n(pl.grad_query.data(), pl.grad_query.size(), grad_emb.data() + ns * d);
      ParamSet<double> grads;
      embed_backward<double>(bundle, bundle.params, tape, grad_emb, grads);

      lr = cosine_lr(config.outer_lr, step, total_steps);
      opt.step(bundle.params, grads, lr);
      ++step;
    }
    const double m = static_cast<double>(config.episodes_per_epoch);
    history.loss.push_back(loss_sum / m);
    history.accuracy.push_back(acc_sum / m);
    ++bundle.epoch;
    if (on_epoch) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      on_epoch({epoch, history.loss.back(), history.accuracy.back(), lr, wall.count()});
    }
  }
  return history;
}

}  // namespace fewshot
