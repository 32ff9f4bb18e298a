#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/model/checkpoint.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/model/optimizer.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace fewshot;
using layers::BatchNormMode;

namespace {

ModelBundle make_bundle(const std::string& projector, std::size_t classes, HeadKind head,
                        ImageShape shape = {3, 16, 16}, std::uint64_t seed = 1) {
  ModelSpec spec;
  spec.backbone = {BackboneKind::conv32f_tiny, shape};
  spec.projector = parse_projector_flags(projector, 1);
  spec.head_kind = head;
  spec.num_classes = classes;
  spec.head_init = HeadInit::he;
  return create_model(spec, seed);
}

Tensor<double> random_images(std::size_t n, const ImageShape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t({n, s.channels, s.height, s.width});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void expect_gradients_match(const std::string& projector, HeadKind head, double tolerance) {
  ModelBundle bundle = make_bundle(projector, 3, head);
  const auto images = random_images(2, bundle.backbone.input, 9);
  const std::vector<std::size_t> labels{0, 2};
  const auto analytic = classification_loss<double>(bundle, bundle.params,
                                                    BatchNormMode::batch_stats, nullptr, images, labels);
  ParamSet<double> params = bundle.params;
  auto loss = [&] {
    return classification_loss<double>(bundle, params, BatchNormMode::batch_stats, nullptr, images,
                                       labels, false)
        .loss;
  };
  const auto cmp = testkit::compare_gradients(params, analytic.grads, loss, 12, 1e-5, 4);
  for (const auto& [group, c] : cmp) {
    if (c.analytic.empty()) continue;
    EXPECT_LE(c.relative_error(), tolerance) << "group " << to_string(group) << " projector "
                                             << projector;
  }
}

}  // namespace

TEST(ModelGradient, FullProjectorLinearHead) { expect_gradients_match("full", HeadKind::linear, 1e-5); }
TEST(ModelGradient, PartialProjectorLinearHead) {
  expect_gradients_match("input_fc,relu", HeadKind::linear, 1e-5);
  expect_gradients_match("input_fc,bn,output_fc", HeadKind::linear, 1e-5);
}
TEST(ModelGradient, NoProjectorCosineHead) { expect_gradients_match("none", HeadKind::cosine, 1e-5); }
TEST(ModelGradient, FullProjectorCosineHead) { expect_gradients_match("full", HeadKind::cosine, 1e-5); }

TEST(ModelGradient, DualHessianVectorProductMatchesDifferencedGradients) {
  ModelBundle bundle = make_bundle("full", 3, HeadKind::linear);
  const auto images = random_images(3, bundle.backbone.input, 10);
  const std::vector<std::size_t> labels{0, 1, 2};
  ParamSet<double> direction = zeros_like(bundle.params);
  Rng rng(12);
  for (GroupId id : kAllGroups) {
    for (auto& p : direction.group(id).params) {
      for (double& v : p.value) v = rng.normal();
    }
  }
  std::vector<Dual> lifted(images.size());
  for (std::size_t i = 0; i < lifted.size(); ++i) lifted[i] = images.data()[i];
  const Tensor<Dual> dual_images(images.dims(), lifted);
  const auto hv = tangent_part(classification_loss<Dual>(bundle, make_dual(bundle.params, direction),
                                                         BatchNormMode::batch_stats, nullptr,
                                                         dual_images, labels)
                                   .grads);
  // Small step: larger ones cross ReLU and max-pool switching points.
  const double h = 1e-7;
  ParamSet<double> up = bundle.params, down = bundle.params;
  axpy(up, h, direction);
  axpy(down, -h, direction);
  const auto gu = classification_loss<double>(bundle, up, BatchNormMode::batch_stats, nullptr, images, labels).grads;
  const auto gd = classification_loss<double>(bundle, down, BatchNormMode::batch_stats, nullptr, images, labels).grads;
  for (GroupId id : kAllGroups) {
    std::vector<double> a, n;
    for (std::size_t t = 0; t < hv.group(id).params.size(); ++t) {
      for (std::size_t i = 0; i < hv.group(id).params[t].value.size(); ++i) {
        a.push_back(hv.group(id).params[t].value[i]);
        n.push_back((gu.group(id).params[t].value[i] - gd.group(id).params[t].value[i]) / (2 * h));
      }
    }
    EXPECT_LT(testkit::normwise_relative_error(a, n), 1e-5) << to_string(id);
  }
}

TEST(Projector, AllSixteenConfigurationsBuildAndKeepWidth) {
  Rng rng(1);
  for (unsigned mask = 0; mask < 16; ++mask) {
    ProjectorConfig c{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0, 6};
    const auto map = build_projector(c, 3);
    const Matrix x = testkit::random_matrix(4, 6, rng);
    const Matrix y = map(x);
    EXPECT_EQ(y.dims(), x.dims());
    EXPECT_EQ(parse_projector_flags(c.flags_string(), 6), c);
  }
}

TEST(Projector, AllOffIsExactIdentity) {
  const auto map = build_projector(ProjectorConfig::none(8), 5);
  EXPECT_TRUE(map.params.empty());
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Matrix x = testkit::random_matrix(1, 8, rng, 10.0);
    EXPECT_EQ(map(x), x);
  }
}

TEST(Projector, PipelineFollowsFixedOrder) {
  using C = ProjectorComponent;
  EXPECT_EQ(ProjectorConfig::full(4).pipeline(),
            (std::vector<C>{C::input_fc, C::bn, C::relu, C::output_fc}));
  EXPECT_EQ(parse_projector_flags("output_fc,relu,input_fc", 4).pipeline(),
            (std::vector<C>{C::input_fc, C::relu, C::output_fc}));
  EXPECT_EQ(ProjectorConfig::full(4).flags_string(), "full");
  EXPECT_EQ(ProjectorConfig::none(4).flags_string(), "none");
  EXPECT_THROW(parse_projector_flags("input_fc,dropout", 4), ConfigError);
}

TEST(Projector, ReluOnlyClampsNegatives) {
  const auto map = build_projector(parse_projector_flags("relu", 3), 1);
  const Matrix x({1, 3}, std::vector<double>{-1.0, 0.5, 2.0});
  EXPECT_EQ(map(x), Matrix({1, 3}, std::vector<double>{0.0, 0.5, 2.0}));
}

TEST(Backbone, FeatureDimFollowsPooling) {
  EXPECT_EQ((BackboneSpec{BackboneKind::conv32f_tiny, {3, 32, 32}}).feature_dim(), 128u);
  EXPECT_EQ((BackboneSpec{BackboneKind::conv64f, {3, 32, 32}}).feature_dim(), 256u);
  EXPECT_EQ((BackboneSpec{BackboneKind::conv32f_tiny, {3, 20, 20}}).feature_dim(), 32u);
  EXPECT_EQ((BackboneSpec{BackboneKind::conv64f, {1, 84, 84}}).feature_dim(), 64u * 25u);
}

TEST(Backbone, RejectsUnavailableKindsAndBadShapes) {
  EXPECT_THROW((BackboneSpec{BackboneKind::resnet12, {3, 32, 32}}).validate(), ConfigError);
  EXPECT_THROW((BackboneSpec{BackboneKind::conv32f_tiny, {3, 8, 8}}).validate(), ConfigError);
  EXPECT_THROW(parse_backbone_kind("vgg"), ConfigError);
  const ModelBundle bundle = make_bundle("full", 3, HeadKind::linear);
  Tensor<double> wrong({2, 1, 16, 16});
  try {
    (void)forward_eval(bundle, wrong);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("expected (N, 3, 16, 16), got (2, 1, 16, 16)"), std::string::npos) << e.what();
  }
}

TEST(Model, EvalPathIgnoresProjectorAndHead) {
  ModelBundle bundle = make_bundle("full", 5, HeadKind::linear);
  const auto images = random_images(4, bundle.backbone.input, 3);
  (void)forward_train(bundle, images);
  const auto before = forward_eval(bundle, images);
  Rng rng(4);
  for (auto* group : {&bundle.params.epsilon, &bundle.params.omega}) {
    for (auto& p : group->params) {
      for (double& v : p.value) v = rng.normal() * 100.0;
    }
  }
  for (auto& p : bundle.buffers.epsilon.params) {
    for (double& v : p.value) v = rng.uniform() + 3.0;
  }
  const auto after = forward_eval(bundle, images);
  EXPECT_EQ(before, after);
  EXPECT_EQ(after.dim(1), bundle.feature_dim());
}

TEST(Model, EvalIsPerImageAndTrainUpdatesRunningStats) {
  ModelBundle bundle = make_bundle("none", 5, HeadKind::linear);
  const auto images = random_images(3, bundle.backbone.input, 5);
  const auto stats_before = bundle.buffers;
  const auto e1 = forward_eval(bundle, images);
  EXPECT_EQ(e1, forward_eval(bundle, images));
  (void)forward_train(bundle, images);
  EXPECT_NE(bundle.buffers, stats_before);
  EXPECT_NE(e1, forward_eval(bundle, images));
}

TEST(Model, ExtractorInitDoesNotDependOnProjectorOrHead) {
  const auto a = make_bundle("none", 5, HeadKind::linear, {3, 16, 16}, 77);
  const auto b = make_bundle("full", 8, HeadKind::cosine, {3, 16, 16}, 77);
  EXPECT_EQ(a.params.theta, b.params.theta);
  EXPECT_TRUE(a.params.epsilon.empty());
  EXPECT_FALSE(b.params.epsilon.empty());
}

TEST(Model, ZeroHeadStartsAtLogC) {
  ModelSpec spec;
  spec.backbone = {BackboneKind::conv32f_tiny, {3, 16, 16}};
  spec.projector = ProjectorConfig::full(1);
  spec.num_classes = 8;
  ModelBundle bundle = create_model(spec, 3);
  const auto images = random_images(6, bundle.backbone.input, 6);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 7};
  const auto r = classification_loss<double>(bundle, bundle.params, BatchNormMode::batch_stats,
                                             nullptr, images, labels, false);
  EXPECT_NEAR(r.loss, std::log(8.0), 1e-12);
}

TEST(Optimizer, MomentumAndDecayFollowUpdateRule) {
  ParamSet<double> p;
  p.theta.add("w", {2}).value = {1.0, -2.0};
  ParamSet<double> g = zeros_like(p);
  g.theta.params[0].value = {0.5, 0.25};
  SgdMomentum opt({0.9, 0.1});
  opt.step(p, g, 0.1);
  // v1 = g + wd w ; w1 = w - lr v1
  const double v1a = 0.5 + 0.1 * 1.0, v1b = 0.25 + 0.1 * -2.0;
  const double w1a = 1.0 - 0.1 * v1a, w1b = -2.0 - 0.1 * v1b;
  EXPECT_DOUBLE_EQ(p.theta.params[0].value[0], w1a);
  EXPECT_DOUBLE_EQ(p.theta.params[0].value[1], w1b);
  opt.step(p, g, 0.1);
  const double v2a = 0.9 * v1a + 0.5 + 0.1 * w1a;
  EXPECT_DOUBLE_EQ(p.theta.params[0].value[0], w1a - 0.1 * v2a);
}

TEST(Optimizer, CosineScheduleEndpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0.1, 0, 10), 0.1);
  EXPECT_NEAR(cosine_lr(0.1, 5, 10), 0.05, 1e-15);
  EXPECT_LT(cosine_lr(0.1, 9, 10), 0.01);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelBundle bundle = make_bundle("input_fc,bn", 4, HeadKind::cosine);
  (void)forward_train(bundle, random_images(3, bundle.backbone.input, 8));
  const auto dir = testkit::scratch_dir();
  save_checkpoint(dir / "c.json", bundle, "abc123", "nonepisodic");
  const auto loaded = load_checkpoint(dir / "c.json");
  EXPECT_EQ(loaded.config_hash, "abc123");
  EXPECT_EQ(loaded.paradigm, "nonepisodic");
  EXPECT_EQ(loaded.bundle.params, bundle.params);
  EXPECT_EQ(loaded.bundle.buffers, bundle.buffers);
  EXPECT_EQ(loaded.bundle.backbone, bundle.backbone);
  EXPECT_EQ(loaded.bundle.projector, bundle.projector);
  EXPECT_EQ(loaded.bundle.head, bundle.head);
  const auto images = random_images(2, bundle.backbone.input, 9);
  EXPECT_EQ(forward_eval(loaded.bundle, images), forward_eval(bundle, images));
}

TEST(Checkpoint, ContradictingExpectationsAndCorruptFilesFail) {
  const ModelBundle bundle = make_bundle("full", 4, HeadKind::linear);
  const auto dir = testkit::scratch_dir();
  save_checkpoint(dir / "c.json", bundle, "h1");
  CheckpointExpectation e;
  e.projector = ProjectorConfig::none(bundle.feature_dim());
  EXPECT_THROW(load_checkpoint(dir / "c.json", e), ConfigError);
  CheckpointExpectation h;
  h.config_hash = "other";
  EXPECT_THROW(load_checkpoint(dir / "c.json", h), ConfigError);
  CheckpointExpectation ok;
  ok.backbone = BackboneKind::conv32f_tiny;
  ok.num_classes = 4;
  EXPECT_NO_THROW(load_checkpoint(dir / "c.json", ok));
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_checkpoint(dir / "bad.json"), IoError);
  EXPECT_THROW(load_checkpoint(dir / "missing.json"), IoError);
}
