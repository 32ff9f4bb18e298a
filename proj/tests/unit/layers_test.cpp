#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fewshot/common/rng.hpp"
#include "fewshot/model/layers.hpp"
#include "gradcheck.hpp"

using namespace fewshot;
using namespace fewshot::layers;
using fewshot::testkit::central_difference;
using fewshot::testkit::normwise_relative_error;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Numeric gradient of f over every entry of v.
std::vector<double> numeric_grad(const std::function<double()>& f, std::vector<double>& v) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = central_difference(f, v[i], 1e-6);
  return g;
}

}  // namespace

TEST(Conv3x3, ForwardMatchesDirectConvolution) {
  Rng rng(1);
  const std::size_t cin = 2, n = 2, h = 5, w = 4, cout = 3;
  auto x = randn(cin * n * h * w, rng);
  auto weight = randn(cout * cin * 9, rng);
  std::vector<double> y(cout * n * h * w), scratch;
  conv3x3_forward(x.data(), cin, n, h, w, weight.data(), cout, y.data(), scratch);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          double s = 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (int dr = -1; dr <= 1; ++dr) {
              for (int dc = -1; dc <= 1; ++dc) {
                const long rr = static_cast<long>(r) + dr;
                const long cc = static_cast<long>(c) + dc;
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
                s += weight[co * cin * 9 + ci * 9 + (dr + 1) * 3 + (dc + 1)] *
                     x[((ci * n + b) * h + rr) * w + cc];
              }
            }
          }
          EXPECT_NEAR(y[((co * n + b) * h + r) * w + c], s, 1e-12);
        }
      }
    }
  }
}

TEST(Conv3x3, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  const std::size_t cin = 2, n = 2, h = 4, w = 3, cout = 2;
  auto x = randn(cin * n * h * w, rng);
  auto weight = randn(cout * cin * 9, rng);
  const auto r = randn(cout * n * h * w, rng);
  std::vector<double> scratch;
  auto loss = [&] {
    std::vector<double> y(r.size()), s;
    conv3x3_forward(x.data(), cin, n, h, w, weight.data(), cout, y.data(), s);
    return dot(y, r);
  };
  std::vector<double> dw(weight.size()), dx(x.size());
  conv3x3_backward(x.data(), cin, n, h, w, weight.data(), cout, r.data(), dw.data(), dx.data(), scratch);
  EXPECT_LT(normwise_relative_error(dw, numeric_grad(loss, weight)), 1e-8);
  EXPECT_LT(normwise_relative_error(dx, numeric_grad(loss, x)), 1e-8);
}

TEST(BatchNorm, BatchStatsNormalizeAndUpdateRunningStats) {
  Rng rng(3);
  const BnLayout layout{2, 6, 6, 1};
  auto x = randn(12, rng, 2.0);
  const std::vector<double> gamma{1.0, 1.0}, beta{0.0, 0.0};
  std::vector<double> rm{0.5, -0.5}, rv{2.0, 3.0}, y(12);
  BnCache<double> cache;
  batchnorm_forward(layout, x.data(), gamma.data(), beta.data(), BatchNormMode::batch_stats_update,
                    rm.data(), rv.data(), rm.data(), rv.data(), y.data(), &cache);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 6; ++i) mean += x[c * 6 + i];
    mean /= 6;
    for (std::size_t i = 0; i < 6; ++i) var += (x[c * 6 + i] - mean) * (x[c * 6 + i] - mean);
    const double biased = var / 6, unbiased = var / 5;
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(y[c * 6 + i], (x[c * 6 + i] - mean) / std::sqrt(biased + 1e-5), 1e-12);
    }
    const double old_mean = c == 0 ? 0.5 : -0.5, old_var = c == 0 ? 2.0 : 3.0;
    EXPECT_NEAR(rm[c], 0.9 * old_mean + 0.1 * mean, 1e-12);
    EXPECT_NEAR(rv[c], 0.9 * old_var + 0.1 * unbiased, 1e-12);
  }
}

TEST(BatchNorm, BatchStatsModeIgnoresRunningStats) {
  Rng rng(4);
  const BnLayout layout{1, 4, 4, 1};
  auto x = randn(4, rng);
  const double g = 1.0, b = 0.0, rm = 7.0, rv = 9.0;
  std::vector<double> y(4);
  batchnorm_forward(layout, x.data(), &g, &b, BatchNormMode::batch_stats, &rm, &rv, nullptr,
                    nullptr, y.data(), static_cast<BnCache<double>*>(nullptr));
  EXPECT_NEAR(y[0] + y[1] + y[2] + y[3], 0.0, 1e-12);
  EXPECT_EQ(rm, 7.0);
  EXPECT_EQ(rv, 9.0);
}

TEST(BatchNorm, RunningStatsUseStoredMoments) {
  const BnLayout layout{1, 3, 3, 1};
  const std::vector<double> x{1.0, 2.0, 4.0};
  const double g = 2.0, b = 0.5, rm = 1.0, rv = 4.0;
  std::vector<double> y(3);
  batchnorm_forward(layout, x.data(), &g, &b, BatchNormMode::running_stats, &rm, &rv, nullptr,
                    nullptr, y.data(), static_cast<BnCache<double>*>(nullptr));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(y[i], 2.0 * (x[i] - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
  }
}

TEST(BatchNorm, BackwardMatchesFiniteDifferencesInBothModes) {
  Rng rng(5);
  // Strided layout: two channels interleaved with element stride 2.
  const BnLayout layout{2, 5, 1, 2};
  auto x = randn(10, rng);
  auto gamma = randn(2, rng);
  auto beta = randn(2, rng);
  const auto r = randn(10, rng);
  const std::vector<double> rm{0.1, -0.2}, rv{1.5, 0.7};
  for (BatchNormMode mode : {BatchNormMode::batch_stats, BatchNormMode::running_stats}) {
    auto loss = [&] {
      std::vector<double> y(10);
      batchnorm_forward(layout, x.data(), gamma.data(), beta.data(), mode, rm.data(), rv.data(),
                        nullptr, nullptr, y.data(), static_cast<BnCache<double>*>(nullptr));
      return dot(y, r);
    };
    std::vector<double> y(10), dx(10), dg(2), db(2);
    BnCache<double> cache;
    batchnorm_forward(layout, x.data(), gamma.data(), beta.data(), mode, rm.data(), rv.data(),
                      nullptr, nullptr, y.data(), &cache);
    batchnorm_backward(layout, r.data(), gamma.data(), cache, dx.data(), dg.data(), db.data());
    EXPECT_LT(normwise_relative_error(dx, numeric_grad(loss, x)), 1e-7);
    EXPECT_LT(normwise_relative_error(dg, numeric_grad(loss, gamma)), 1e-7);
    EXPECT_LT(normwise_relative_error(db, numeric_grad(loss, beta)), 1e-7);
  }
}

TEST(MaxPool, PicksMaximumAndFirstOnTies) {
  // one channel, one image, 2x4 -> 1x2
  const std::vector<double> x{1, 5, 3, 3, 2, 0, 3, 3};
  std::vector<double> y(2);
  std::vector<std::uint32_t> arg;
  maxpool2_forward(x.data(), 1, 1, 2, 4, y.data(), arg);
  EXPECT_EQ(y[0], 5);
  EXPECT_EQ(y[1], 3);
  EXPECT_EQ(arg[0], 1u);
  EXPECT_EQ(arg[1], 2u);
  std::vector<double> dx(8);
  const std::vector<double> dy{1.0, 2.0};
  maxpool2_backward(arg, dy.data(), dx.data(), 8);
  EXPECT_EQ(dx, (std::vector<double>{0, 1, 2, 0, 0, 0, 0, 0}));
}

TEST(MaxPool, OddSizesFloor) {
  Rng rng(6);
  auto x = randn(2 * 3 * 5 * 5, rng);
  std::vector<double> y(2 * 3 * 2 * 2);
  std::vector<std::uint32_t> arg;
  maxpool2_forward(x.data(), 2, 3, 5, 5, y.data(), arg);
  EXPECT_EQ(arg.size(), y.size());
  const double expect = std::max({x[0], x[1], x[5], x[6]});
  EXPECT_EQ(y[0], expect);
}

TEST(Relu, ForwardAndBackward) {
  std::vector<double> v{-1.0, 0.0, 2.0};
  relu_forward(std::span(v));
  EXPECT_EQ(v, (std::vector<double>{0.0, 0.0, 2.0}));
  std::vector<double> g{5.0, 5.0, 5.0};
  relu_backward(std::span<const double>(v), std::span(g));
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0, 5.0}));
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  const std::size_t n = 3, in = 4, out = 2;
  auto x = randn(n * in, rng);
  auto w = randn(out * in, rng);
  auto b = randn(out, rng);
  const auto r = randn(n * out, rng);
  auto loss = [&] {
    std::vector<double> y(n * out);
    linear_forward(x.data(), n, in, w.data(), b.data(), out, y.data());
    return dot(y, r);
  };
  std::vector<double> dw(w.size()), db(b.size()), dx(x.size());
  linear_backward(x.data(), n, in, w.data(), out, r.data(), dw.data(), db.data(), dx.data());
  EXPECT_LT(normwise_relative_error(dw, numeric_grad(loss, w)), 1e-8);
  EXPECT_LT(normwise_relative_error(db, numeric_grad(loss, b)), 1e-8);
  EXPECT_LT(normwise_relative_error(dx, numeric_grad(loss, x)), 1e-8);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogC) {
  Tensor<double> logits({4, 8}, 0.25);
  const std::vector<std::size_t> labels{0, 3, 7, 2};
  EXPECT_NEAR(softmax_cross_entropy(logits, labels, static_cast<Tensor<double>*>(nullptr)),
              std::log(8.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  Tensor<double> logits({3, 4});
  for (double& v : logits.values()) v = 3.0 * rng.normal();
  const std::vector<std::size_t> labels{1, 0, 3};
  Tensor<double> grad;
  softmax_cross_entropy(logits, labels, &grad);
  std::vector<double> values(logits.values().begin(), logits.values().end());
  auto loss = [&] {
    Tensor<double> t(logits.dims(), values);
    return softmax_cross_entropy(t, labels, static_cast<Tensor<double>*>(nullptr));
  };
  const std::vector<double> analytic(grad.values().begin(), grad.values().end());
  EXPECT_LT(normwise_relative_error(analytic, numeric_grad(loss, values)), 1e-8);
}

TEST(SoftmaxRows, HugeLogitsStayFinite) {
  Tensor<double> logits({1, 3}, std::vector<double>{1000.0, 999.0, -1000.0});
  const auto p = softmax_rows(logits);
  EXPECT_NEAR(p(0, 0) + p(0, 1) + p(0, 2), 1.0, 1e-15);
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Argmax, LowestIndexWinsTies) {
  const std::vector<double> row{0.1, 0.7, 0.7, 0.2};
  EXPECT_EQ(argmax(row), 1u);
}
