// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when a gated criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fewshot/analysis/cluster.hpp"
#include "fewshot/analysis/divergence.hpp"
#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/data/episode.hpp"
#include "fewshot/data/synthetic.hpp"
#include "fewshot/harness/ablation.hpp"
#include "fewshot/harness/config.hpp"
#include "fewshot/harness/diagnostics.hpp"
#include "fewshot/harness/run.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/evaluation.hpp"
#include "fewshot/paradigms/meta.hpp"
#include "fewshot/paradigms/metric.hpp"
#include "fewshot/paradigms/nonepisodic.hpp"
#include "gradcheck.hpp"

using namespace fewshot;
namespace fs = std::filesystem;
using layers::BatchNormMode;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a sub-check; the criterion passes only if every check does.
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m({rows, cols});
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

Tensor<double> random_images(std::size_t n, const ImageShape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t({n, s.channels, s.height, s.width});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

ModelBundle make_model(const std::string& projector, std::size_t classes, ImageShape shape,
                       std::uint64_t seed, HeadInit init = HeadInit::he) {
  ModelSpec spec;
  spec.backbone = {BackboneKind::conv32f_tiny, shape};
  spec.projector = parse_projector_flags(projector, 1);
  spec.num_classes = classes;
  spec.head_init = init;
  return create_model(spec, seed);
}

LabeledDataset synth(std::uint64_t seed, std::size_t classes, std::size_t items, ImageShape shape,
                     ShiftSpec shift = {}, bool distinct = true) {
  SyntheticSpec s;
  s.base_seed = seed;
  s.classes = classes;
  s.items_per_class = items;
  s.shape = shape;
  s.shift = shift;
  s.distinct_classes = distinct;
  return make_synthetic_domain(s);
}

fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("fewshot_acceptance_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1 ---------------------------------------------------------------------

Outcome projector_identity_and_order() {
  Outcome o;
  Rng rng(1);
  const std::size_t d = 6;
  std::size_t built = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    const ProjectorConfig c{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0, d};
    const auto map = build_projector(c, 3);
    const Matrix y = map(random_matrix(5, d, rng));
    if (y.dims() == Dims{5, d}) ++built;
  }
  o.check(built == 16, "only " + std::to_string(built) + "/16 configs built");

  const auto identity = build_projector(ProjectorConfig::none(d), 5);
  std::size_t exact = 0;
  for (int i = 0; i < 100; ++i) {
    const Matrix x = random_matrix(1, d, rng, 10.0);
    if (identity(x) == x) ++exact;
  }
  o.check(exact == 100, "identity exact on " + std::to_string(exact) + "/100 vectors");

  // Hand composition fc -> bn -> relu -> fc with batch statistics.
  const auto full = build_projector(ProjectorConfig::full(d), 9);
  const Matrix x = random_matrix(7, d, rng);
  const auto& P = full.params;
  auto fc = [&](const Matrix& in, const std::string& prefix) {
    Matrix out({in.dim(0), d});
    const auto& w = P.at(prefix + ".weight").value;
    const auto& b = P.at(prefix + ".bias").value;
    for (std::size_t r = 0; r < in.dim(0); ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        double s = b[j];
        for (std::size_t k = 0; k < d; ++k) s += in(r, k) * w[j * d + k];
        out(r, j) = s;
      }
    }
    return out;
  };
  Matrix h = fc(x, "fc1");
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < h.dim(0); ++r) mean += h(r, j);
    mean /= static_cast<double>(h.dim(0));
    for (std::size_t r = 0; r < h.dim(0); ++r) var += (h(r, j) - mean) * (h(r, j) - mean);
    var /= static_cast<double>(h.dim(0));
    for (std::size_t r = 0; r < h.dim(0); ++r) {
      h(r, j) = P.at("bn.weight").value[j] * (h(r, j) - mean) / std::sqrt(var + layers::kBatchNormEpsilon) +
                P.at("bn.bias").value[j];
    }
  }
  for (double& v : h.values()) v = std::max(v, 0.0);
  const Matrix want = fc(h, "fc2");
  const Matrix got = full(x);
  double err = 0.0;
  for (std::size_t k = 0; k < want.size(); ++k) err = std::max(err, std::abs(want[k] - got[k]));
  o.check(err < 1e-12, "full pipeline differs from fc,bn,relu,fc composition by " + fmt(err));
  using C = ProjectorComponent;
  o.check(ProjectorConfig::full(d).pipeline() == std::vector<C>{C::input_fc, C::bn, C::relu, C::output_fc},
          "pipeline order");
  o.note("16/16 configs, identity exact on 100 vectors, composition max err " + fmt(err, 2));
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradient_correctness() {
  Outcome o;
  ModelBundle bundle = make_model("full", 3, {3, 32, 32}, 1);
  const auto images = random_images(2, bundle.backbone.input, 9);
  const std::vector<std::size_t> labels{0, 2};
  const auto analytic = classification_loss<double>(bundle, bundle.params, BatchNormMode::batch_stats,
                                                    nullptr, images, labels);
  ParamSet<double> params = bundle.params;
  auto loss = [&] {
    return classification_loss<double>(bundle, params, BatchNormMode::batch_stats, nullptr, images,
                                       labels, false)
        .loss;
  };
  const auto cmp = testkit::compare_gradients(params, analytic.grads, loss, 24, 1e-5, 4);
  for (GroupId id : kAllGroups) {
    const auto it = cmp.find(id);
    if (it == cmp.end() || it->second.analytic.empty()) {
      o.check(false, std::string("no coordinates checked in ") + to_string(id));
      continue;
    }
    const double e = it->second.relative_error();
    o.check(e <= 1e-4, std::string(to_string(id)) + " relative error " + fmt(e));
    o.note(std::string(to_string(id)) + " " + fmt(e, 2) + " over " +
           std::to_string(it->second.analytic.size()) + " coords");
  }
  return o;
}

// ---- 3 ---------------------------------------------------------------------

Outcome eval_path_contract() {
  Outcome o;
  ModelBundle bundle = make_model("full", 4, {3, 16, 16}, 2);
  const auto ds = synth(3, 4, 8, {3, 16, 16});
  ParadigmConfig cfg = ParadigmConfig::defaults(ParadigmKind::non_episodic);
  cfg.epochs = 1;
  cfg.batch_size = 8;
  pretrain_nonepisodic(bundle, ds, cfg, 5);
  const auto images = ds.gather(ds.all_items());
  const auto before = forward_eval(bundle, images);
  Rng rng(4);
  for (auto* group : {&bundle.params.epsilon, &bundle.params.omega, &bundle.buffers.epsilon}) {
    for (auto& p : group->params) {
      for (double& v : p.value) v = 3.0 + 100.0 * rng.uniform();
    }
  }
  const auto after = forward_eval(bundle, images);
  o.check(before == after, "forward_eval changed after mutating projector/classifier state");
  o.check(after.dim(1) == bundle.feature_dim(), "eval output width is not the extractor width");
  o.note("trained bundle, " + std::to_string(images.dim(0)) + " images, outputs bitwise equal");
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Matrix softmax_neg(const Matrix& dist, double shift) {
  Matrix p(dist.dims());
  for (std::size_t r = 0; r < dist.dim(0); ++r) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < dist.dim(1); ++c) best = std::max(best, -(dist(r, c) + shift));
    double z = 0.0;
    for (std::size_t c = 0; c < dist.dim(1); ++c) z += std::exp(-(dist(r, c) + shift) - best);
    for (std::size_t c = 0; c < dist.dim(1); ++c) p(r, c) = std::exp(-(dist(r, c) + shift) - best) / z;
  }
  return p;
}

Outcome prototype_oracle() {
  Outcome o;
  Rng rng(17);
  double worst_sum = 0.0, worst_shift = 0.0;
  std::size_t proto_mismatch = 0, argmax_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t way = 1 + rng.below(5), shot = 1 + rng.below(5);
    const std::size_t d = 1 + rng.below(8), nq = 1 + rng.below(10);
    const Matrix s = random_matrix(way * shot, d, rng);
    std::vector<std::size_t> labels(way * shot);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % way;
    const Matrix protos = compute_prototypes(s, labels, way);
    for (std::size_t c = 0; c < way; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i] == c) sum += s(i, j);
        }
        if (protos(c, j) != sum / static_cast<double>(shot)) ++proto_mismatch;
      }
    }
    const Matrix q = random_matrix(nq, d, rng);
    const Matrix probs = proto_predict(q, protos, DistanceKind::sq_euclidean);
    const auto pred = predicted_labels(probs);
    const Matrix dist = prototype_distances(q, protos, DistanceKind::sq_euclidean);
    for (std::size_t r = 0; r < nq; ++r) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      double row = 0.0;
      for (std::size_t c = 0; c < way; ++c) {
        double dd = 0.0;
        for (std::size_t j = 0; j < d; ++j) dd += (q(r, j) - protos(c, j)) * (q(r, j) - protos(c, j));
        if (dd < best_d) best_d = dd, best = c;
        row += probs(r, c);
      }
      if (pred[r] != best) ++argmax_mismatch;
      worst_sum = std::max(worst_sum, std::abs(row - 1.0));
    }
    for (double shift : {-50.0, 3.0, 1e3}) {
      const Matrix shifted = softmax_neg(dist, shift);
      for (std::size_t k = 0; k < probs.size(); ++k) {
        worst_shift = std::max(worst_shift, std::abs(shifted[k] - probs[k]));
      }
    }
  }
  o.check(proto_mismatch == 0, std::to_string(proto_mismatch) + " prototype entries differ");
  o.check(argmax_mismatch == 0, std::to_string(argmax_mismatch) + " argmax mismatches");
  o.check(worst_sum <= 1e-12, "row sum error " + fmt(worst_sum));
  o.check(worst_shift <= 1e-12, "distance-shift error " + fmt(worst_shift));
  o.note("50 instances; row-sum err " + fmt(worst_sum, 2) + ", shift err " + fmt(worst_shift, 2));
  return o;
}

// ---- 5 ---------------------------------------------------------------------

ParamSet<double> vec_params(std::vector<double> w) {
  ParamSet<double> p;
  p.theta.add("w", {w.size()}).value = std::move(w);
  return p;
}

Outcome meta_sanity() {
  Outcome o;
  const double alpha = 0.3;
  const std::vector<double> w0{1.5, -2.0, 0.25};
  const ObjectiveFn half_norm = [](const ParamSet<double>& p) {
    const auto& w = p.theta.params[0].value;
    double l = 0.0;
    for (double v : w) l += 0.5 * v * v;
    return Objective{l, vec_params(w)};
  };
  const auto adapted = inner_trajectory(vec_params(w0), half_norm, {alpha, 1, InnerSubset::all}).back();
  double err = 0.0;
  for (std::size_t i = 0; i < w0.size(); ++i) {
    err = std::max(err, std::abs(adapted.theta.params[0].value[i] - (1 - alpha) * w0[i]));
  }
  o.check(err <= 1e-12, "inner step error " + fmt(err));

  const auto bundle = make_model("full", 3, {3, 16, 16}, 6);
  const auto ds = synth(6, 3, 2, {3, 16, 16});
  ParadigmConfig cfg = ParadigmConfig::defaults(ParadigmKind::meta);
  cfg.inner_subset = InnerSubset::head_only;
  cfg.inner_lr = 0.5;
  cfg.inner_steps = 3;
  const auto head_only = meta_inner_adapt(bundle, ds.gather(std::vector<ItemRef>{{0, 0}, {1, 0}, {2, 0}}),
                                          std::vector<std::size_t>{0, 1, 2}, cfg);
  o.check(head_only.theta == bundle.params.theta, "head_only changed theta");
  o.check(head_only.omega != bundle.params.omega, "head_only did not adapt the head");

  // Support 0.5 (w-c)^T A (w-c), query 0.5 (w-b)^T B (w-b), one inner step:
  // first-order outer gradient = B (w' - b), w' = w - alpha A (w - c).
  const double A[2][2] = {{2.0, 0.5}, {0.5, 1.0}}, B[2][2] = {{1.5, -0.3}, {-0.3, 0.8}};
  const double c[2] = {1.0, -1.0}, b[2] = {-2.0, 0.5}, w[2] = {0.4, 0.9}, a = 0.1;
  auto quad = [](const double (&M)[2][2], const double (&ctr)[2]) {
    return ObjectiveFn([&M, &ctr](const ParamSet<double>& p) {
      const auto& v = p.theta.params[0].value;
      const double dd[2] = {v[0] - ctr[0], v[1] - ctr[1]};
      const double g[2] = {M[0][0] * dd[0] + M[0][1] * dd[1], M[1][0] * dd[0] + M[1][1] * dd[1]};
      return Objective{0.5 * (dd[0] * g[0] + dd[1] * g[1]), vec_params({g[0], g[1]})};
    });
  };
  const double gs[2] = {A[0][0] * (w[0] - c[0]) + A[0][1] * (w[1] - c[1]),
                        A[1][0] * (w[0] - c[0]) + A[1][1] * (w[1] - c[1])};
  const double wp[2] = {w[0] - a * gs[0], w[1] - a * gs[1]};
  const double hand[2] = {B[0][0] * (wp[0] - b[0]) + B[0][1] * (wp[1] - b[1]),
                          B[1][0] * (wp[0] - b[0]) + B[1][1] * (wp[1] - b[1])};
  const auto fo = meta_gradient(vec_params({w[0], w[1]}), quad(A, c), quad(B, b), {}, {a, 1, InnerSubset::all});
  const double fo_err = std::max(std::abs(fo.grad.theta.params[0].value[0] - hand[0]),
                                 std::abs(fo.grad.theta.params[0].value[1] - hand[1]));
  o.check(fo_err <= 1e-6, "first-order gradient error " + fmt(fo_err));
  o.note("inner err " + fmt(err, 2) + ", theta bitwise unchanged, first-order err " + fmt(fo_err, 2));
  return o;
}

// ---- 6 ---------------------------------------------------------------------

FeatureSample as_sample(Matrix m, std::vector<std::size_t> labels = {}) {
  FeatureSample s;
  if (labels.empty()) labels.assign(m.dim(0), 0);
  s.features = std::move(m);
  s.labels = std::move(labels);
  return s;
}

Outcome metrics_oracles() {
  Outcome o;
  Rng rng(23);
  const auto s = as_sample(random_matrix(200, 8, rng));
  const double self = gaussian_kl(s, s);
  o.check(std::abs(self) <= 1e-10, "KL(s,s) = " + fmt(self));

  const double one_d = kl_divergence({{0.0}, {1.0}}, {{1.0}, {1.0}});
  o.check(one_d == 0.5, "1-D KL = " + fmt(one_d, 17));

  const std::vector<double> mp{0.5, 0.0, -1.0, 3.0}, sp{1.5, 0.5, 1.0, 0.7};
  const std::vector<double> mq{0.0, 1.0, -1.0, 2.0}, sq{1.0, 0.5, 2.0, 1.0};
  auto draw = [&](const std::vector<double>& m, const std::vector<double>& sd) {
    Matrix x({10000, 4});
    for (std::size_t r = 0; r < 10000; ++r) {
      for (std::size_t j = 0; j < 4; ++j) x(r, j) = m[j] + sd[j] * rng.normal();
    }
    return as_sample(std::move(x));
  };
  const auto target = draw(mp, sp), source = draw(mq, sq);
  double truth = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double vp = sp[j] * sp[j], vq = sq[j] * sq[j];
    truth += 0.5 * (std::log(vq / vp) + (vp + (mp[j] - mq[j]) * (mp[j] - mq[j])) / vq - 1.0);
  }
  const double mc = gaussian_kl(source, target);
  const double rel = std::abs(mc - truth) / truth;
  o.check(rel <= 0.05, "Monte-Carlo KL off by " + fmt(100 * rel) + "%");

  Matrix hand({4, 1}, std::vector<double>{0.0, 2.0, 10.0, 12.0});
  const auto cm = cluster_metrics(as_sample(hand, {0, 0, 1, 1}));
  o.check(cm.d1 == 2.0 && cm.v == 1.0 && cm.r == 0.2,
          "hand case (" + fmt(cm.d1, 17) + ", " + fmt(cm.v, 17) + ", " + fmt(cm.r, 17) + ")");

  Matrix feats = random_matrix(60, 5, rng);
  std::vector<std::size_t> labels(60);
  for (std::size_t i = 0; i < 60; ++i) labels[i] = i % 4;
  const double r0 = cluster_metrics(as_sample(feats, labels)).r;
  double worst = 0.0;
  for (double scale : {0.5, 3.0, 10.0}) {
    Matrix scaled = feats;
    for (double& v : scaled.values()) v *= scale;
    worst = std::max(worst, std::abs(cluster_metrics(as_sample(scaled, labels)).r - r0));
  }
  o.check(worst <= 1e-9, "r scale error " + fmt(worst));
  o.note("self " + fmt(self, 2) + ", 1-D 0.5, MC " + fmt(mc) + " vs " + fmt(truth) + ", r drift " +
         fmt(worst, 2));
  return o;
}

// ---- 7 ---------------------------------------------------------------------

Outcome episode_protocol() {
  Outcome o;
  const auto ds = synth(31, 12, 25, {3, 16, 16});
  Rng rng(5);
  std::size_t bad = 0;
  for (int e = 0; e < 1000; ++e) {
    const std::size_t way = 2 + e % 4, shot = 1 + e % 5, query = 1 + e % 7;
    const Episode ep = sample_episode(ds, way, shot, query, rng);
    std::set<ItemRef> support, all;
    std::map<std::size_t, std::size_t> sc, qc;
    bool ok = episode_violations(ep).empty() && ep.class_map.size() == way &&
              std::set<std::size_t>(ep.class_map.begin(), ep.class_map.end()).size() == way;
    for (const auto& it : ep.support) {
      support.insert(it.ref);
      all.insert(it.ref);
      ok = ok && it.label < way && ep.class_map[it.label] == it.ref.class_index;
      ++sc[it.label];
    }
    for (const auto& it : ep.query) {
      ok = ok && support.count(it.ref) == 0 && it.label < way &&
           ep.class_map[it.label] == it.ref.class_index;
      all.insert(it.ref);
      ++qc[it.label];
    }
    ok = ok && all.size() == way * (shot + query);
    for (std::size_t c = 0; c < way; ++c) ok = ok && sc[c] == shot && qc[c] == query;
    if (!ok) ++bad;
  }
  o.check(bad == 0, std::to_string(bad) + "/1000 episodes violate the protocol");

  auto throws = [](auto&& fn, auto tag) {
    try {
      fn();
    } catch (const decltype(tag)&) {
      return true;
    } catch (...) {
      return false;
    }
    return false;
  };
  const auto small = synth(1, 4, 3, {3, 16, 16});
  o.check(throws([&] { Rng r(1); (void)sample_episode(small, 5, 1, 1, r); }, DataError("")),
          "too few classes not rejected");
  o.check(throws([&] { Rng r(1); (void)sample_episode(small, 3, 2, 2, r); }, DataError("")),
          "too few items not rejected");
  o.check(throws([&] { Rng r(1); (void)sample_episode(small, 0, 1, 1, r); }, ConfigError("")),
          "zero way not rejected");
  o.check(throws([&] { Rng r(1); (void)sample_episode(small, 2, 0, 1, r); }, ConfigError("")),
          "zero shot not rejected");

  bool same = true;
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) same = same && sample_episode(ds, 5, 1, 15, a) == sample_episode(ds, 5, 1, 15, b);
  o.check(same, "identical seeds gave different episodes");
  o.note("1000 episodes clean, errors raised, seeds reproduce");
  return o;
}

// ---- 8 ---------------------------------------------------------------------

constexpr ImageShape kSmokeShape{3, 32, 32};

const LabeledDataset& smoke_source() {
  static const LabeledDataset source = synth(7, 8, 40, kSmokeShape);
  return source;
}

// Source model shared by criteria 8 and 10.
std::optional<ModelBundle> g_trained_full;

ModelBundle train_source_model(const std::string& projector, const LabeledDataset& source,
                               TrainHistory* history) {
  ModelBundle bundle = make_model(projector, source.classes().size(), kSmokeShape, 41, HeadInit::zero);
  ParadigmConfig cfg = ParadigmConfig::defaults(ParadigmKind::non_episodic);
  cfg.epochs = 5;
  cfg.batch_size = 32;
  auto h = pretrain_nonepisodic(bundle, source, cfg, 43);
  if (history) *history = h;
  return bundle;
}

Outcome smoke_experiments() {
  Outcome o;
  const auto& source = smoke_source();
  TrainHistory h;
  g_trained_full = train_source_model("full", source, &h);
  const double a = h.accuracy.back();
  o.check(a > 0.9, "(a) final training accuracy " + fmt(a));
  o.note("(a) train acc " + fmt(a) + " after " + std::to_string(h.accuracy.size()) + " epochs");

  const auto target = synth(99, 10, 30, kSmokeShape, {ShiftKind::channel_affine, 0.5, 3});
  EvalSpec spec;
  spec.way = 5;
  spec.shot = 1;
  spec.episodes = 600;
  const auto eval = evaluate_episodes(*g_trained_full, target, spec, 11);
  o.check(eval.summary.mean >= 0.35, "(b) shifted-target accuracy " + fmt(eval.summary.mean));
  o.note("(b) 5w1s " + fmt(eval.summary.mean) + " +- " + fmt(eval.summary.ci_half_width, 2));

  ModelBundle metric = make_model("full", 0, kSmokeShape, 51);
  ParadigmConfig mcfg = ParadigmConfig::defaults(ParadigmKind::metric);
  mcfg.epochs = 2;
  mcfg.episodes_per_epoch = 30;
  const auto mh = train_metric(metric, source, mcfg, 53);
  o.check(mh.accuracy.back() > 0.8, "(c) metric training accuracy " + fmt(mh.accuracy.back()));
  o.note("(c) metric acc " + fmt(mh.accuracy.back()));

  const auto null_data = synth(61, 10, 30, kSmokeShape, {}, false);
  const ModelBundle untrained = make_model("full", 0, kSmokeShape, 63);
  const auto control = evaluate_episodes(untrained, null_data, spec, 13);
  o.check(control.summary.mean >= 0.14 && control.summary.mean <= 0.26,
          "(d) random-extractor control " + fmt(control.summary.mean));
  o.note("(d) control " + fmt(control.summary.mean));
  return o;
}

// ---- 9 ---------------------------------------------------------------------

ExperimentConfig tiny_experiment() {
  return ExperimentConfig::parse(R"(paradigm = nonepisodic
input_shape = 3x16x16
source = synth:seed=5,classes=5,items=8
targets = synth:seed=6,classes=5,items=8,shift=channel-affine,magnitude=0.5,name=shifted
epochs = 2
batch_size = 10
eval_way = 5
eval_shot = 1
eval_query = 3
eval_episodes = 40
tune_steps = 30
metrics_subsample = 40
seed = 8
)");
}

Outcome ablation_harness() {
  Outcome o;
  const fs::path root = scratch("ablation");
  const auto grid = AblationGrid::standard();
  const auto entries = run_ablation(tiny_experiment(), grid, root / "grid");
  o.check(entries.size() == 8, std::to_string(entries.size()) + " rows");
  std::set<std::string> labels;
  for (const auto& e : entries) labels.insert(e.label);
  o.check(labels.size() == 8, "row labels not distinct");
  bool deltas = !entries.empty() && entries.front().delta == 0.0;
  for (const auto& e : entries) {
    deltas = deltas && std::abs(e.delta - (e.mean_accuracy - entries.front().mean_accuracy)) < 1e-15;
  }
  o.check(deltas, "deltas are not measured against row (a)");

  auto none = tiny_experiment();
  none.projector = "none";
  none.out = root / "none";
  const auto none_run = run_experiment(none);
  const fs::path row_a = entries.front().run_dir;
  o.check(slurp(row_a / kCheckpointFile) == slurp(root / "none" / kCheckpointFile),
          "row (a) checkpoint differs from the projector-none run");
  o.check(slurp(row_a / kReportDir / "shifted.json") == slurp(root / "none" / kReportDir / "shifted.json"),
          "row (a) report differs from the projector-none run");
  o.check(entries.front().mean_accuracy == none_run.reports.at(0).mean_accuracy,
          "row (a) accuracy differs");

  auto full = tiny_experiment();
  full.projector = "full";
  full.out = root / "rerun1";
  const auto r1 = run_experiment(full);
  full.out = root / "rerun2";
  const auto r2 = run_experiment(full);
  double worst = 0.0;
  auto cmp = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
  for (std::size_t i = 0; i < r1.history.loss.size(); ++i) {
    cmp(r1.history.loss[i], r2.history.loss[i]);
    cmp(r1.history.accuracy[i], r2.history.accuracy[i]);
  }
  for (std::size_t i = 0; i < r1.reports.size(); ++i) {
    const auto& x = r1.reports[i];
    const auto& y = r2.reports[i];
    for (auto [p, q] : {std::pair{x.mean_accuracy, y.mean_accuracy}, {x.ci_half_width, y.ci_half_width},
                        {x.kl_divergence, y.kl_divergence}, {x.d1, y.d1}, {x.v, y.v}, {x.r, y.r}}) {
      cmp(p, q);
    }
  }
  o.check(worst <= 1e-6, "rerun drift " + fmt(worst));
  o.check(r1.reports.size() == r2.reports.size() && r1.history.loss.size() == r2.history.loss.size(),
          "rerun produced a different number of results");
  // row (h) equals the standalone full run
  o.check(std::abs(entries.back().mean_accuracy - r1.reports.at(0).mean_accuracy) <= 1e-6,
          "row (h) disagrees with a standalone full run");
  std::printf("%s", format_ablation_table(entries).c_str());

  const std::vector<BackboneKind> backbones{BackboneKind::conv32f_tiny};
  const auto sweep = run_backbone_sweep(tiny_experiment(), backbones, root / "sweep");
  o.check(sweep.size() == 1, "sweep produced " + std::to_string(sweep.size()) + " entries");
  for (const auto& e : sweep) {
    const auto problems = audit_sweep_pair(e.dir_none, e.dir_full);
    o.check(problems.empty(), "sweep pair audit: " + (problems.empty() ? "" : problems.front()));
  }
  std::printf("%s", format_sweep_table(sweep).c_str());
  o.note("8 rows, row (a) bitwise equal to none run, rerun drift " + fmt(worst, 2) +
         ", sweep pair audited");
  fs::remove_all(root);
  return o;
}

// ---- 10 --------------------------------------------------------------------

Outcome diagnostic_trend() {
  Outcome o;
  const auto& source = smoke_source();
  if (!g_trained_full) g_trained_full = train_source_model("full", source, nullptr);
  const ModelBundle& full = *g_trained_full;
  const ModelBundle none = train_source_model("none", source, nullptr);

  const FeatureBank source_bank(full, source);
  std::vector<double> kls;
  std::string trend;
  for (double m : {0.0, 0.25, 0.5, 1.0}) {
    const auto target = synth(7, 8, 40, kSmokeShape, {ShiftKind::channel_affine, m, 3});
    const FeatureBank bank(full, target);
    const auto d = compute_diagnostics(source_bank, source, bank, target, 2000, 19);
    kls.push_back(d.kl);
    trend += (trend.empty() ? "" : ", ") + fmt(m, 2) + ":" + fmt(d.kl);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < kls.size(); ++i) monotone = monotone && kls[i] >= kls[i - 1];
  o.check(monotone, "KL not non-decreasing in shift magnitude");
  o.note("KL by magnitude {" + trend + "}");

  const auto target = synth(99, 10, 30, kSmokeShape, {ShiftKind::channel_affine, 0.5, 3});
  EvalSpec spec;
  spec.episodes = 600;
  for (const ModelBundle* bundle : {&full, &none}) {
    const FeatureBank sb(*bundle, source), tb(*bundle, target);
    const auto d = compute_diagnostics(sb, source, tb, target, 2000, 19);
    const auto acc = evaluate_episodes(tb, target, spec, 11);
    o.note(bundle->projector.flags_string() + ": kl " + fmt(d.kl) + " acc " + fmt(acc.summary.mean));
  }
  return o;
}

struct Criterion {
  int id;
  const char* title;
  bool gated;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "projector identity and composition", true, projector_identity_and_order},
      {2, "gradient correctness", true, gradient_correctness},
      {3, "eval-path contract", true, eval_path_contract},
      {4, "prototype oracle", true, prototype_oracle},
      {5, "meta-learning sanity", true, meta_sanity},
      {6, "metrics oracles", true, metrics_oracles},
      {7, "episode protocol", true, episode_protocol},
      {8, "smoke experiments", true, smoke_experiments},
      {9, "ablation and sweep harness", true, ablation_harness},
      {10, "diagnostic trend (reported only)", false, diagnostic_trend},
  };
  std::vector<std::string> lines;
  bool all_gated = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.gated && !o.pass) all_gated = false;
    char head[128];
    std::snprintf(head, sizeof head, "criterion %2d %s%s  %s (%.1f s): ", c.id, o.pass ? "PASS" : "FAIL",
                  c.gated ? "" : " [not gated]", c.title, secs);
    lines.push_back(head + o.detail);
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return all_gated ? 0 : 1;
}
