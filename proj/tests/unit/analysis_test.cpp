#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fewshot/analysis/accuracy.hpp"
#include "fewshot/analysis/cluster.hpp"
#include "fewshot/analysis/divergence.hpp"
#include "fewshot/analysis/embeddings.hpp"
#include "fewshot/analysis/report.hpp"
#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fixtures.hpp"

using namespace fewshot;

namespace {

FeatureSample sample_of(const std::vector<std::vector<double>>& rows,
                        std::vector<std::size_t> labels = {}) {
  FeatureSample s;
  s.features = Matrix({rows.size(), rows.front().size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < rows[r].size(); ++j) s.features(r, j) = rows[r][j];
  }
  if (labels.empty()) labels.assign(rows.size(), 0);
  s.labels = std::move(labels);
  s.dataset = "t";
  return s;
}

FeatureSample gaussian_sample(std::size_t n, const std::vector<double>& mean,
                              const std::vector<double>& stddev, Rng& rng) {
  FeatureSample s;
  s.features = Matrix({n, mean.size()});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < mean.size(); ++j) s.features(r, j) = mean[j] + stddev[j] * rng.normal();
  }
  s.labels.assign(n, 0);
  return s;
}

// KL(p || q) for diagonal Gaussians, written from the textbook definition.
double kl_oracle(const std::vector<double>& mp, const std::vector<double>& vp,
                 const std::vector<double>& mq, const std::vector<double>& vq) {
  double kl = 0.0;
  for (std::size_t j = 0; j < mp.size(); ++j) {
    kl += std::log(std::sqrt(vq[j]) / std::sqrt(vp[j])) +
          (vp[j] + (mp[j] - mq[j]) * (mp[j] - mq[j])) / (2.0 * vq[j]) - 0.5;
  }
  return kl;
}

}  // namespace

TEST(Divergence, SelfDivergenceIsZero) {
  Rng rng(1);
  FeatureSample s;
  s.features = testkit::random_matrix(50, 6, rng);
  s.labels.assign(50, 0);
  EXPECT_NEAR(gaussian_kl(s, s), 0.0, 1e-12);
}

TEST(Divergence, OneDimensionalHandCase) {
  // p = N(1, 1), q = N(0, 1): KL(p || q) = 0.5
  const DiagonalGaussian p{{1.0}, {1.0}}, q{{0.0}, {1.0}};
  EXPECT_NEAR(kl_divergence(p, q), 0.5, 1e-15);
  // sample level: target {0, 2} has mean 1 var 1, source {-1, 1} has mean 0 var 1
  EXPECT_NEAR(gaussian_kl(sample_of({{-1}, {1}}), sample_of({{0}, {2}})), 0.5, 1e-12);
}

TEST(Divergence, MatchesClosedFormOnSampledGaussians) {
  Rng rng(7);
  const std::vector<double> ms{0.0, 1.0, -1.0, 2.0}, ss{1.0, 0.5, 2.0, 1.0};
  const std::vector<double> mt{0.5, 0.0, -1.0, 3.0}, st{1.5, 0.5, 1.0, 0.7};
  const auto source = gaussian_sample(10000, ms, ss, rng);
  const auto target = gaussian_sample(10000, mt, st, rng);
  std::vector<double> vs(4), vt(4);
  for (int j = 0; j < 4; ++j) vs[j] = ss[j] * ss[j], vt[j] = st[j] * st[j];
  const double truth = kl_oracle(mt, vt, ms, vs);
  EXPECT_NEAR(gaussian_kl(source, target), truth, 0.05 * truth);
}

TEST(Divergence, IsAsymmetricAndTranslationInvariant) {
  Rng rng(3);
  const auto a = gaussian_sample(400, {0, 0}, {1, 1}, rng);
  const auto b = gaussian_sample(400, {1, 0}, {3, 1}, rng);
  EXPECT_GT(std::abs(gaussian_kl(a, b) - gaussian_kl(b, a)), 0.1);
  auto a2 = a, b2 = b;
  for (std::size_t r = 0; r < 400; ++r) {
    a2.features(r, 0) += 17.0, b2.features(r, 0) += 17.0;
    a2.features(r, 1) -= 4.0, b2.features(r, 1) -= 4.0;
  }
  EXPECT_NEAR(gaussian_kl(a, b), gaussian_kl(a2, b2), 1e-9);
}

TEST(Divergence, FitUsesMaximumLikelihoodVarianceWithFloor) {
  const auto g = fit_diagonal_gaussian(sample_of({{1, 5}, {3, 5}}).features);
  EXPECT_DOUBLE_EQ(g.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(g.variance[0], 1.0);
  EXPECT_DOUBLE_EQ(g.variance[1], kVarianceFloor);
}

TEST(Divergence, RejectsBadInputs) {
  EXPECT_THROW(gaussian_kl(sample_of({{1, 2}, {3, 4}}), sample_of({{1}, {2}})), ShapeError);
  EXPECT_THROW(gaussian_kl(sample_of({{1}}), sample_of({{1}, {2}})), ConfigError);
}

TEST(Cluster, HandComputedTwoClassCase) {
  const auto s = sample_of({{0}, {2}, {10}, {12}}, {0, 0, 1, 1});
  const auto m = cluster_metrics(s);
  EXPECT_NEAR(m.d1, 2.0, 1e-12);
  EXPECT_NEAR(m.v, 1.0, 1e-12);
  EXPECT_NEAR(m.inter, 10.0, 1e-12);
  EXPECT_NEAR(m.r, 0.2, 1e-12);
  // item-pair inter distance: |0-10|,|0-12|,|2-10|,|2-12| -> mean 10
  EXPECT_NEAR(cluster_metrics(s, InterClassDistance::items).inter, 10.0, 1e-12);
}

TEST(Cluster, RatioIsScaleInvariantAndVarianceQuadratic) {
  Rng rng(5);
  FeatureSample s;
  s.features = testkit::random_matrix(60, 5, rng);
  for (std::size_t i = 0; i < 60; ++i) s.labels.push_back(i % 4);
  const auto base = cluster_metrics(s);
  for (double a : {0.5, 3.0, 10.0}) {
    auto scaled = s;
    for (double& v : scaled.features.values()) v *= a;
    const auto m = cluster_metrics(scaled);
    EXPECT_NEAR(m.r, base.r, 1e-12 * std::max(1.0, base.r));
    EXPECT_NEAR(m.v, a * a * base.v, 1e-10 * a * a * base.v);
    EXPECT_NEAR(m.d1, a * base.d1, 1e-10 * a * base.d1);
  }
}

TEST(Cluster, SingletonClassContributesZero) {
  // class 1 has one item: d1 = mean(2, 0) = 1, v = mean(1, 0) = 0.5
  const auto m = cluster_metrics(sample_of({{0}, {2}, {10}}, {0, 0, 1}));
  EXPECT_NEAR(m.d1, 1.0, 1e-12);
  EXPECT_NEAR(m.v, 0.5, 1e-12);
}

TEST(Cluster, RejectsDegenerateInputs) {
  EXPECT_THROW(cluster_metrics(sample_of({{0}, {1}}, {0, 0})), ConfigError);
  EXPECT_THROW(cluster_metrics(sample_of({{1}, {1}}, {0, 1})), DataError);
  EXPECT_THROW(parse_inter_class_distance("median"), ConfigError);
}

TEST(Accuracy, MeanAndIntervalMatchOracle) {
  const std::vector<double> acc{0.6, 0.8};
  const auto s = aggregate_accuracy(acc);
  EXPECT_NEAR(s.mean, 0.7, 1e-15);
  // population std 0.1
  EXPECT_NEAR(s.ci_half_width, 1.96 * 0.1 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(s.count, 2u);
  const std::vector<double> same(10, 0.4);
  EXPECT_NEAR(aggregate_accuracy(same).ci_half_width, 0.0, 1e-15);
  EXPECT_THROW(aggregate_accuracy(std::vector<double>{}), ConfigError);
}

TEST(Accuracy, IntervalCoversBernoulliMean) {
  Rng rng(9);
  std::vector<double> acc(5000);
  for (double& a : acc) a = rng.uniform() < 0.65 ? 1.0 : 0.0;
  const auto s = aggregate_accuracy(acc);
  EXPECT_NEAR(s.mean, 0.65, 3 * s.ci_half_width);
  EXPECT_NEAR(s.ci_half_width, 1.96 * std::sqrt(0.65 * 0.35 / 5000), 1e-3);
}

TEST(Accuracy, PermutationInvariant) {
  Rng rng(2);
  std::vector<double> acc(37);
  for (double& a : acc) a = rng.uniform();
  auto shuffled = acc;
  rng.shuffle(std::span<double>(shuffled));
  const auto a = aggregate_accuracy(acc), b = aggregate_accuracy(shuffled);
  EXPECT_NEAR(a.mean, b.mean, 1e-14);
  EXPECT_NEAR(a.ci_half_width, b.ci_half_width, 1e-14);
}

TEST(Embeddings, RoundTripIsExact) {
  Rng rng(4);
  FeatureSample s;
  s.features = testkit::random_matrix(9, 3, rng, 1e-3);
  s.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  s.dataset = "target";
  const auto dir = testkit::scratch_dir();
  export_embeddings(s, dir / "e.tsv");
  const auto back = read_embeddings(dir / "e.tsv");
  EXPECT_EQ(back.features.storage(), s.features.storage());
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.dataset, "target");
  FeatureSample empty;
  EXPECT_THROW(export_embeddings(empty, dir / "x.tsv"), ConfigError);
}

TEST(Report, JsonRoundTrip) {
  MetricsReport r;
  r.dataset = "tgt";
  r.source_dataset = "src";
  r.mean_accuracy = 0.123456789012345;
  r.ci_half_width = 0.01;
  r.episodes = 600;
  r.kl_divergence = 3.5;
  r.d1 = 1;
  r.v = 2;
  r.r = 0.5;
  r.config_hash = "abc";
  r.projector = "input_fc,bn,relu,output_fc";
  r.paradigm = "meta";
  EXPECT_EQ(report_from_json(to_json(r)), r);
  const auto dir = testkit::scratch_dir();
  write_report(dir / "r.json", r);
  EXPECT_EQ(read_report(dir / "r.json"), r);
  EXPECT_THROW(read_report(dir / "missing.json"), IoError);
}
