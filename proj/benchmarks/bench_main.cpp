#include <benchmark/benchmark.h>

#include <vector>

#include "fewshot/common/gemm.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/data/synthetic.hpp"
#include "fewshot/model/layers.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/evaluation.hpp"
#include "fewshot/paradigms/meta.hpp"

using namespace fewshot;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

ModelBundle bench_model(ImageShape shape, const char* projector, std::size_t classes) {
  ModelSpec spec;
  spec.backbone = {BackboneKind::conv32f_tiny, shape};
  spec.projector = parse_projector_flags(projector, 1);
  spec.num_classes = classes;
  spec.head_init = HeadInit::he;
  return create_model(spec, 1);
}

Tensor<double> bench_images(std::size_t n, ImageShape s) {
  return Tensor<double>({n, s.channels, s.height, s.width}, noise(n * s.pixel_count(), 2));
}

}  // namespace

static void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    gemm<double>(false, true, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

static void BM_Conv3x3Forward(benchmark::State& state) {
  const std::size_t cin = 32, cout = 32, n = 8;
  const auto hw = static_cast<std::size_t>(state.range(0));
  const auto x = noise(cin * n * hw * hw, 1), w = noise(cout * cin * 9, 2);
  std::vector<double> y(cout * n * hw * hw), scratch;
  for (auto _ : state) {
    layers::conv3x3_forward(x.data(), cin, n, hw, hw, w.data(), cout, y.data(), scratch);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Conv3x3Forward)->Arg(16)->Arg(32);

static void BM_BackboneForwardBackward(benchmark::State& state) {
  const ImageShape shape{3, 32, 32};
  const ModelBundle bundle = bench_model(shape, "full", 8);
  const auto images = bench_images(static_cast<std::size_t>(state.range(0)), shape);
  std::vector<std::size_t> labels(images.dim(0));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 8;
  for (auto _ : state) {
    auto r = classification_loss<double>(bundle, bundle.params, layers::BatchNormMode::batch_stats,
                                         nullptr, images, labels);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackboneForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_ForwardEval(benchmark::State& state) {
  const ImageShape shape{3, 32, 32};
  const ModelBundle bundle = bench_model(shape, "full", 0);
  const auto images = bench_images(64, shape);
  for (auto _ : state) benchmark::DoNotOptimize(forward_eval(bundle, images));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardEval)->Unit(benchmark::kMillisecond);

static void BM_SecondOrderMetaGradient(benchmark::State& state) {
  const ImageShape shape{3, 16, 16};
  const ModelBundle bundle = bench_model(shape, "full", 5);
  const auto support = bench_images(5, shape), query = bench_images(10, shape);
  const std::vector<std::size_t> sl{0, 1, 2, 3, 4}, ql{0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  const auto s = support_objective(bundle, support, sl);
  const auto q = support_objective(bundle, query, ql);
  const auto hvp = support_hvp(bundle, support, sl);
  const bool second = state.range(0) != 0;
  for (auto _ : state) {
    auto g = meta_gradient(bundle.params, s, q, second ? hvp : HvpFn{}, {0.01, 1, InnerSubset::all});
    benchmark::DoNotOptimize(g.query_loss);
  }
}
BENCHMARK(BM_SecondOrderMetaGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_EpisodeEvaluation(benchmark::State& state) {
  const ImageShape shape{3, 16, 16};
  SyntheticSpec spec;
  spec.base_seed = 3;
  spec.classes = 10;
  spec.items_per_class = 20;
  spec.shape = shape;
  const auto ds = make_synthetic_domain(spec);
  const ModelBundle bundle = bench_model(shape, "full", 0);
  const FeatureBank bank(bundle, ds);
  EvalSpec eval;
  eval.episodes = 100;
  eval.threads = 1;
  eval.method = state.range(0) == 0 ? EvalMethod::tune : EvalMethod::proto;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_episodes(bank, ds, eval, 7).summary.mean);
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_EpisodeEvaluation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
