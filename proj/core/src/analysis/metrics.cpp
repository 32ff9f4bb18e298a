#include <cmath>
#include <map>
#include <vector>

#include "fewshot/analysis/accuracy.hpp"
#include "fewshot/analysis/cluster.hpp"
#include "fewshot/analysis/divergence.hpp"
#include "fewshot/common/error.hpp"

namespace fewshot {

void FeatureSample::validate() const {
  if (features.rank() != 2 || features.dim(0) < 2 || features.dim(1) == 0) {
    throw ConfigError("feature sample '" + dataset + "' needs at least 2 rows of non-empty features");
  }
  if (labels.size() != features.dim(0)) {
    throw ConfigError("feature sample '" + dataset + "' has " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(features.dim(0)) + " rows");
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw ConfigError("feature sample '" + dataset + "' has non-finite entries");
  }
}

DiagonalGaussian fit_diagonal_gaussian(const Matrix& features, double variance_floor) {
  const std::size_t n = features.dim(0);
  const std::size_t d = features.dim(1);
  DiagonalGaussian g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) g.mean[j] += features(r, j);
  }
  for (double& m : g.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features(r, j) - g.mean[j];
      g.variance[j] += c * c;
    }
  }
  for (double& v : g.variance) v = std::max(v / static_cast<double>(n), variance_floor);
  return g;
}

double kl_divergence(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  if (p.mean.size() != q.mean.size()) throw ShapeError("kl_divergence: dimension mismatch");
  double kl = 0.0;
  for (std::size_t j = 0; j < p.mean.size(); ++j) {
    const double diff = p.mean[j] - q.mean[j];
    kl += std::log(q.variance[j] / p.variance[j]) + (p.variance[j] + diff * diff) / q.variance[j] -
          1.0;
  }
  return std::max(0.0, 0.5 * kl);
}

double gaussian_kl(const FeatureSample& source, const FeatureSample& target) {
  if (source.features.rank() != 2 || target.features.rank() != 2 ||
      source.features.dim(1) != target.features.dim(1)) {
    throw ShapeError("gaussian_kl: feature dimensions differ (" +
                     dims_to_string(source.features.dims()) + " vs " +
                     dims_to_string(target.features.dims()) + ")");
  }
  if (source.features.dim(0) < 2 || target.features.dim(0) < 2) {
    throw ConfigError("gaussian_kl: each sample needs at least 2 rows");
  }
  return kl_divergence(fit_diagonal_gaussian(target.features), fit_diagonal_gaussian(source.features));
}

std::string to_string(InterClassDistance d) {
  return d == InterClassDistance::centroid ? "centroid" : "items";
}

InterClassDistance parse_inter_class_distance(std::string_view text) {
  if (text == "centroid") return InterClassDistance::centroid;
  if (text == "items") return InterClassDistance::items;
  throw ConfigError("unknown inter-class distance '" + std::string(text) +
                    "' (expected centroid or items)");
}

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

}  // namespace

ClusterMetrics cluster_metrics(const FeatureSample& sample, InterClassDistance inter) {
  if (sample.features.rank() != 2 || sample.labels.size() != sample.features.dim(0)) {
    throw ConfigError("cluster_metrics: labels do not match feature rows");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < sample.labels.size(); ++r) by_class[sample.labels[r]].push_back(r);
  if (by_class.size() < 2) throw ConfigError("cluster_metrics needs at least 2 classes");

  const std::size_t d = sample.features.dim(1);
  const auto& f = sample.features;
  ClusterMetrics m;
  std::vector<std::vector<double>> centroids;
  for (const auto& [label, rows] : by_class) {
    std::vector<double> c(d, 0.0);
    for (std::size_t r : rows) {
      for (std::size_t j = 0; j < d; ++j) c[j] += f(r, j);
    }
    for (double& v : c) v /= static_cast<double>(rows.size());
    if (rows.size() >= 2) {
      double pair_sum = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b, ++pairs) {
          pair_sum += l2(f.row(rows[a]), f.row(rows[b]));
        }
      }
      m.d1 += pair_sum / static_cast<double>(pairs);
      double sq = 0.0;
      for (std::size_t r : rows) {
        const double dist = l2(f.row(r), c);
        sq += dist * dist;
      }
      m.v += sq / static_cast<double>(rows.size());
    }
    centroids.push_back(std::move(c));
  }
  const auto k = static_cast<double>(by_class.size());
  m.d1 /= k;
  m.v /= k;

  double inter_sum = 0.0;
  std::size_t inter_pairs = 0;
  if (inter == InterClassDistance::centroid) {
    for (std::size_t a = 0; a < centroids.size(); ++a) {
      for (std::size_t b = a + 1; b < centroids.size(); ++b, ++inter_pairs) {
        inter_sum += l2(centroids[a], centroids[b]);
      }
    }
  } else {
    for (std::size_t a = 0; a < sample.labels.size(); ++a) {
      for (std::size_t b = a + 1; b < sample.labels.size(); ++b) {
        if (sample.labels[a] == sample.labels[b]) continue;
        inter_sum += l2(f.row(a), f.row(b));
        ++inter_pairs;
      }
    }
  }
  m.inter = inter_sum / static_cast<double>(inter_pairs);
  if (!(m.inter > 0.0)) throw DataError("cluster_metrics: inter-class distance is zero");
  m.r = m.d1 / m.inter;
  return m;
}

AccuracySummary aggregate_accuracy(std::span<const double> per_episode) {
  if (per_episode.empty()) throw ConfigError("aggregate_accuracy: empty accuracy list");
  const auto n = static_cast<double>(per_episode.size());
  double mean = 0.0;
  for (double a : per_episode) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : per_episode) var += (a - mean) * (a - mean);
  var /= n;
  return {mean, 1.96 * std::sqrt(var) / std::sqrt(n), per_episode.size()};
}

}  // namespace fewshot
