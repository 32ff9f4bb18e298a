#include "fewshot/model/backbone.hpp"

#include <cmath>

#include "fewshot/common/rng.hpp"

namespace fewshot {

using layers::BatchNormMode;

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::conv32f_tiny: return "conv32f-tiny";
    case BackboneKind::conv64f: return "conv64f";
    case BackboneKind::resnet12: return "resnet12";
  }
  return "?";
}

BackboneKind parse_backbone_kind(std::string_view text) {
  if (text == "conv32f-tiny") return BackboneKind::conv32f_tiny;
  if (text == "conv64f") return BackboneKind::conv64f;
  if (text == "resnet12") return BackboneKind::resnet12;
  throw ConfigError("unknown backbone kind '" + std::string(text) +
                    "' (expected conv32f-tiny, conv64f or resnet12)");
}

void BackboneSpec::validate() const {
  if (kind == BackboneKind::resnet12) {
    throw ConfigError("backbone resnet12 is not available in this build");
  }
  if (input.channels == 0 || input.height < 16 || input.width < 16) {
    throw ConfigError("backbone input " + to_string(input) +
                      " too small: four 2x2 pooling stages need at least 16x16");
  }
}

std::size_t BackboneSpec::filters() const {
  return kind == BackboneKind::conv64f ? 64 : 32;
}

std::size_t BackboneSpec::feature_dim() const {
  std::size_t h = input.height;
  std::size_t w = input.width;
  for (std::size_t b = 0; b < kConvBlocks; ++b) {
    h /= 2;
    w /= 2;
  }
  return filters() * h * w;
}

Backbone::Backbone(BackboneSpec spec) : spec_(spec) { spec_.validate(); }

void Backbone::check_input(const Dims& dims) const {
  const auto& in = spec_.input;
  if (dims.size() != 4 || dims[1] != in.channels || dims[2] != in.height ||
      dims[3] != in.width || dims[0] == 0) {
    throw ShapeError("input shape mismatch: expected (N, " + std::to_string(in.channels) + ", " +
                     std::to_string(in.height) + ", " + std::to_string(in.width) + "), got " +
                     dims_to_string(dims));
  }
}

ParamGroup<double> Backbone::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  ParamGroup<double> g;
  std::size_t cin = spec_.input.channels;
  const std::size_t cout = spec_.filters();
  for (std::size_t b = 0; b < kConvBlocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    auto& w = g.add(prefix + ".conv.weight", {cout, cin, 3, 3});
    const double stddev = std::sqrt(2.0 / static_cast<double>(cin * 9));
    for (double& v : w.value) v = stddev * rng.normal();
    g.add(prefix + ".bn.weight", {cout}, 1.0);
    g.add(prefix + ".bn.bias", {cout}, 0.0);
    cin = cout;
  }
  return g;
}

ParamGroup<double> Backbone::init_buffers() const {
  ParamGroup<double> g;
  for (std::size_t b = 0; b < kConvBlocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    g.add(prefix + ".bn.running_mean", {spec_.filters()}, 0.0);
    g.add(prefix + ".bn.running_var", {spec_.filters()}, 1.0);
  }
  return g;
}

template <typename T>
Tensor<T> Backbone::forward(const ParamGroup<T>& params, BatchNormMode mode, RunningStats stats,
                            const Tensor<T>& images, BackboneTape<T>* tape) const {
  check_input(images.dims());
  if (mode == BatchNormMode::running_stats && stats.read == nullptr) {
    throw ConfigError("backbone: running statistics required in evaluation mode");
  }
  if (mode == BatchNormMode::batch_stats_update && stats.write == nullptr) {
    throw ConfigError("backbone: running statistics target required when updating");
  }
  const std::size_t n = images.dim(0);
  std::size_t cin = spec_.input.channels;
  std::size_t h = spec_.input.height;
  std::size_t w = spec_.input.width;
  const std::size_t cout = spec_.filters();

  // (n, c, h, w) -> (c, n, h, w)
  std::vector<T> x(images.size());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = images.data() + (b * cin + c) * h * w;
      std::copy(src, src + h * w, x.data() + (c * n + b) * h * w);
    }
  }

  if (tape) {
    tape->batch = n;
    tape->blocks.assign(kConvBlocks, {});
  }
  std::vector<T> scratch;
  std::vector<T> conv;
  std::vector<T> bn_out;
  layers::BnCache<T> local_bn;
  std::vector<std::uint32_t> local_argmax;
  for (std::size_t b = 0; b < kConvBlocks; ++b) {
    const auto& weight = params.params[3 * b].value;
    const auto& gamma = params.params[3 * b + 1].value;
    const auto& beta = params.params[3 * b + 2].value;
    const std::size_t m = n * h * w;
    conv.assign(cout * m, T(0));
    layers::conv3x3_forward(x.data(), cin, n, h, w, weight.data(), cout, conv.data(), scratch);

    bn_out.assign(cout * m, T(0));
    const double* rmean = nullptr;
    const double* rvar = nullptr;
    double* umean = nullptr;
    double* uvar = nullptr;
    if (stats.read) {
      rmean = stats.read->params[2 * b].value.data();
      rvar = stats.read->params[2 * b + 1].value.data();
    }
    if (stats.write && mode == BatchNormMode::batch_stats_update) {
      umean = stats.write->params[2 * b].value.data();
      uvar = stats.write->params[2 * b + 1].value.data();
    }
    auto* bn_cache = tape ? &tape->blocks[b].bn : &local_bn;
    layers::batchnorm_forward(layers::BnLayout{cout, m, m, 1}, conv.data(), gamma.data(),
                              beta.data(), mode, rmean, rvar, umean, uvar, bn_out.data(),
                              bn_cache);
    layers::relu_forward(std::span<T>(bn_out));

    std::vector<T> pooled(cout * n * (h / 2) * (w / 2));
    auto& argmax = tape ? tape->blocks[b].pool_argmax : local_argmax;
    layers::maxpool2_forward(bn_out.data(), cout, n, h, w, pooled.data(), argmax);

    if (tape) {
      auto& blk = tape->blocks[b];
      blk.cin = cin;
      blk.height = h;
      blk.width = w;
      blk.input = std::move(x);
      blk.activated = bn_out;
    }
    x = std::move(pooled);
    cin = cout;
    h /= 2;
    w /= 2;
  }

  // (c, n, h, w) -> (n, c * h * w)
  const std::size_t plane = h * w;
  Tensor<T> features({n, cout * plane});
  for (std::size_t c = 0; c < cout; ++c) {
    for (std::size_t b = 0; b < n; ++b) {
      const T* src = x.data() + (c * n + b) * plane;
      std::copy(src, src + plane, features.data() + b * cout * plane + c * plane);
    }
  }
  return features;
}

template <typename T>
ParamGroup<T> Backbone::backward(const ParamGroup<T>& params, const BackboneTape<T>& tape,
                                 const Tensor<T>& grad_features) const {
  const std::size_t n = tape.batch;
  const std::size_t cout = spec_.filters();
  ParamGroup<T> grads = zeros_like(params);

  const auto& last = tape.blocks.back();
  std::size_t h = last.height / 2;
  std::size_t w = last.width / 2;
  const std::size_t plane = h * w;
  std::vector<T> grad(cout * n * plane);
  for (std::size_t c = 0; c < cout; ++c) {
    for (std::size_t b = 0; b < n; ++b) {
      const T* src = grad_features.data() + b * cout * plane + c * plane;
      std::copy(src, src + plane, grad.data() + (c * n + b) * plane);
    }
  }

  std::vector<T> scratch;
  for (std::size_t bi = kConvBlocks; bi-- > 0;) {
    const auto& blk = tape.blocks[bi];
    const std::size_t m = n * blk.height * blk.width;
    std::vector<T> d_act(cout * m);
    layers::maxpool2_backward(blk.pool_argmax, grad.data(), d_act.data(), d_act.size());
    layers::relu_backward(std::span<const T>(blk.activated), std::span<T>(d_act));

    std::vector<T> d_conv(cout * m);
    layers::batchnorm_backward(layers::BnLayout{cout, m, m, 1}, d_act.data(),
                               params.params[3 * bi + 1].value.data(), blk.bn, d_conv.data(),
                               grads.params[3 * bi + 1].value.data(),
                               grads.params[3 * bi + 2].value.data());

    std::vector<T> d_input;
    if (bi > 0) d_input.resize(blk.cin * m);
    layers::conv3x3_backward(blk.input.data(), blk.cin, n, blk.height, blk.width,
                             params.params[3 * bi].value.data(), cout, d_conv.data(),
                             grads.params[3 * bi].value.data(),
                             bi > 0 ? d_input.data() : nullptr, scratch);
    grad = std::move(d_input);
  }
  return grads;
}

template Tensor<double> Backbone::forward<double>(const ParamGroup<double>&, BatchNormMode,
                                                  RunningStats, const Tensor<double>&,
                                                  BackboneTape<double>*) const;
template Tensor<Dual> Backbone::forward<Dual>(const ParamGroup<Dual>&, BatchNormMode,
                                              RunningStats, const Tensor<Dual>&,
                                              BackboneTape<Dual>*) const;
template ParamGroup<double> Backbone::backward<double>(const ParamGroup<double>&,
                                                       const BackboneTape<double>&,
                                                       const Tensor<double>&) const;
template ParamGroup<Dual> Backbone::backward<Dual>(const ParamGroup<Dual>&,
                                                   const BackboneTape<Dual>&,
                                                   const Tensor<Dual>&) const;

}  // namespace fewshot
