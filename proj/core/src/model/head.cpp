#include "fewshot/model/head.hpp"

#include <cmath>

#include "fewshot/common/gemm.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/model/layers.hpp"

namespace fewshot {
namespace {

constexpr double kNormSmoothing = 1e-12;

// Rows of `v` (rows x d) divided by their smoothed norms.
template <typename T>
void normalize_rows(const T* v, std::size_t rows, std::size_t d, T* unit, T* norms) {
  using std::sqrt;
  for (std::size_t r = 0; r < rows; ++r) {
    T sq(0);
    for (std::size_t j = 0; j < d; ++j) sq += v[r * d + j] * v[r * d + j];
    const T nrm = sqrt(sq + T(kNormSmoothing));
    norms[r] = nrm;
    for (std::size_t j = 0; j < d; ++j) unit[r * d + j] = v[r * d + j] / nrm;
  }
}

// Given g = dL/du for u = v / n(v), accumulate dL/dv = g / n - u (u . g) / n.
template <typename T>
void normalize_rows_backward(const T* unit, const T* norms, const T* g, std::size_t rows,
                             std::size_t d, T* dv) {
  for (std::size_t r = 0; r < rows; ++r) {
    T ug(0);
    for (std::size_t j = 0; j < d; ++j) ug += unit[r * d + j] * g[r * d + j];
    for (std::size_t j = 0; j < d; ++j) {
      dv[r * d + j] = (g[r * d + j] - unit[r * d + j] * ug) / norms[r];
    }
  }
}

}  // namespace

std::string to_string(HeadKind kind) { return kind == HeadKind::linear ? "linear" : "cosine"; }

HeadKind parse_head_kind(std::string_view text) {
  if (text == "linear") return HeadKind::linear;
  if (text == "cosine") return HeadKind::cosine;
  throw ConfigError("unknown head kind '" + std::string(text) + "' (expected linear or cosine)");
}

ClassifierHead::ClassifierHead(HeadSpec spec) : spec_(spec) {
  if (spec_.feature_dim == 0) throw ConfigError("head feature_dim must be >= 1");
}

ParamGroup<double> ClassifierHead::init_params(std::uint64_t seed) const {
  ParamGroup<double> g;
  if (spec_.num_classes == 0) return g;
  auto& w = g.add("weight", {spec_.num_classes, spec_.feature_dim});
  if (spec_.init == HeadInit::he) {
    Rng rng(seed);
    const double stddev = std::sqrt(2.0 / static_cast<double>(spec_.feature_dim));
    for (double& v : w.value) v = stddev * rng.normal();
  }
  if (spec_.kind == HeadKind::linear) g.add("bias", {spec_.num_classes}, 0.0);
  return g;
}

template <typename T>
Tensor<T> ClassifierHead::forward(const ParamGroup<T>& params, const Tensor<T>& x,
                                  HeadTape<T>* tape) const {
  const std::size_t d = spec_.feature_dim;
  const std::size_t c = spec_.num_classes;
  if (c == 0) throw ConfigError("model has no classifier head");
  if (x.rank() != 2 || x.dim(1) != d) {
    throw ShapeError("head input: expected (N, " + std::to_string(d) + "), got " +
                     dims_to_string(x.dims()));
  }
  const std::size_t n = x.dim(0);
  if (tape) tape->input = x;
  Tensor<T> logits({n, c});
  const auto& w = params.at("weight").value;
  if (spec_.kind == HeadKind::linear) {
    layers::linear_forward(x.data(), n, d, w.data(), params.at("bias").value.data(), c,
                           logits.data());
    return logits;
  }
  std::vector<T> xu(n * d), xn(n), wu(c * d), wn(c);
  normalize_rows(x.data(), n, d, xu.data(), xn.data());
  normalize_rows(w.data(), c, d, wu.data(), wn.data());
  gemm<T>(false, true, n, c, d, xu.data(), wu.data(), logits.data(), false);
  for (T& v : logits.values()) v *= T(spec_.temperature);
  return logits;
}

template <typename T>
ParamGroup<T> ClassifierHead::backward(const ParamGroup<T>& params, const HeadTape<T>& tape,
                                       const Tensor<T>& grad_logits,
                                       Tensor<T>* grad_input) const {
  const std::size_t d = spec_.feature_dim;
  const std::size_t c = spec_.num_classes;
  const std::size_t n = tape.input.dim(0);
  ParamGroup<T> grads = zeros_like(params);
  const auto& w = params.at("weight").value;
  Tensor<T> dx({n, d});
  if (spec_.kind == HeadKind::linear) {
    layers::linear_backward(tape.input.data(), n, d, w.data(), c, grad_logits.data(),
                            grads.at("weight").value.data(), grads.at("bias").value.data(),
                            dx.data());
  } else {
    std::vector<T> xu(n * d), xn(n), wu(c * d), wn(c);
    normalize_rows(tape.input.data(), n, d, xu.data(), xn.data());
    normalize_rows(w.data(), c, d, wu.data(), wn.data());
    std::vector<T> g(grad_logits.storage());
    for (T& v : g) v *= T(spec_.temperature);
    std::vector<T> dxu(n * d), dwu(c * d);
    gemm<T>(false, false, n, d, c, g.data(), wu.data(), dxu.data(), false);
    gemm<T>(true, false, c, d, n, g.data(), xu.data(), dwu.data(), false);
    normalize_rows_backward(xu.data(), xn.data(), dxu.data(), n, d, dx.data());
    normalize_rows_backward(wu.data(), wn.data(), dwu.data(), c, d,
                            grads.at("weight").value.data());
  }
  if (grad_input) *grad_input = std::move(dx);
  return grads;
}

template Tensor<double> ClassifierHead::forward<double>(const ParamGroup<double>&,
                                                        const Tensor<double>&,
                                                        HeadTape<double>*) const;
template Tensor<Dual> ClassifierHead::forward<Dual>(const ParamGroup<Dual>&, const Tensor<Dual>&,
                                                    HeadTape<Dual>*) const;
template ParamGroup<double> ClassifierHead::backward<double>(const ParamGroup<double>&,
                                                             const HeadTape<double>&,
                                                             const Tensor<double>&,
                                                             Tensor<double>*) const;
template ParamGroup<Dual> ClassifierHead::backward<Dual>(const ParamGroup<Dual>&,
                                                         const HeadTape<Dual>&,
                                                         const Tensor<Dual>&,
                                                         Tensor<Dual>*) const;

}  // namespace fewshot
