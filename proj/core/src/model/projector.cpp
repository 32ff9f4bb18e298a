#include "fewshot/model/projector.hpp"

#include <cmath>

#include "fewshot/common/rng.hpp"

namespace fewshot {

using layers::BatchNormMode;

namespace {
thread_local std::uint64_t g_projector_forwards = 0;
}  // namespace

std::uint64_t projector_forward_count() noexcept { return g_projector_forwards; }

const char* to_string(ProjectorComponent c) {
  switch (c) {
    case ProjectorComponent::input_fc: return "input_fc";
    case ProjectorComponent::bn: return "bn";
    case ProjectorComponent::relu: return "relu";
    case ProjectorComponent::output_fc: return "output_fc";
  }
  return "?";
}

std::vector<ProjectorComponent> ProjectorConfig::pipeline() const {
  std::vector<ProjectorComponent> out;
  if (input_fc) out.push_back(ProjectorComponent::input_fc);
  if (bn) out.push_back(ProjectorComponent::bn);
  if (relu) out.push_back(ProjectorComponent::relu);
  if (output_fc) out.push_back(ProjectorComponent::output_fc);
  return out;
}

std::string ProjectorConfig::flags_string() const {
  if (is_identity()) return "none";
  if (input_fc && bn && relu && output_fc) return "full";
  std::string out;
  for (auto c : pipeline()) {
    if (!out.empty()) out += ',';
    out += to_string(c);
  }
  return out;
}

ProjectorConfig parse_projector_flags(std::string_view text, std::size_t feature_dim) {
  if (text == "none") return ProjectorConfig::none(feature_dim);
  if (text == "full") return ProjectorConfig::full(feature_dim);
  ProjectorConfig cfg = ProjectorConfig::none(feature_dim);
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, end - start);
    if (item == "input_fc") {
      cfg.input_fc = true;
    } else if (item == "bn") {
      cfg.bn = true;
    } else if (item == "relu") {
      cfg.relu = true;
    } else if (item == "output_fc") {
      cfg.output_fc = true;
    } else {
      throw ConfigError("unknown projector component '" + std::string(item) +
                        "' (expected none, full, or a comma list of input_fc, bn, relu, "
                        "output_fc)");
    }
    start = end + 1;
  }
  return cfg;
}

Projector::Projector(ProjectorConfig config) : config_(config) {
  if (config_.feature_dim == 0) throw ConfigError("projector feature_dim must be >= 1");
}

ParamGroup<double> Projector::init_params(std::uint64_t seed) const {
  const std::size_t d = config_.feature_dim;
  const double stddev = std::sqrt(2.0 / static_cast<double>(d));
  ParamGroup<double> g;
  if (config_.input_fc) {
    Rng rng(derive_seed(seed, "fc1"));
    auto& w = g.add("fc1.weight", {d, d});
    for (double& v : w.value) v = stddev * rng.normal();
    g.add("fc1.bias", {d}, 0.0);
  }
  if (config_.bn) {
    g.add("bn.weight", {d}, 1.0);
    g.add("bn.bias", {d}, 0.0);
  }
  if (config_.output_fc) {
    Rng rng(derive_seed(seed, "fc2"));
    auto& w = g.add("fc2.weight", {d, d});
    for (double& v : w.value) v = stddev * rng.normal();
    g.add("fc2.bias", {d}, 0.0);
  }
  return g;
}

ParamGroup<double> Projector::init_buffers() const {
  ParamGroup<double> g;
  if (config_.bn) {
    g.add("bn.running_mean", {config_.feature_dim}, 0.0);
    g.add("bn.running_var", {config_.feature_dim}, 1.0);
  }
  return g;
}

template <typename T>
Tensor<T> Projector::forward(const ParamGroup<T>& params, BatchNormMode mode, RunningStats stats,
                             const Tensor<T>& x, ProjectorTape<T>* tape) const {
  ++g_projector_forwards;
  const std::size_t d = config_.feature_dim;
  if (x.rank() != 2 || x.dim(1) != d) {
    throw ShapeError("projector input: expected (N, " + std::to_string(d) + "), got " +
                     dims_to_string(x.dims()));
  }
  const std::size_t n = x.dim(0);
  if (tape) tape->stage_inputs.clear();
  Tensor<T> cur = x;
  for (auto component : config_.pipeline()) {
    if (tape) tape->stage_inputs.push_back(cur);
    Tensor<T> next({n, d});
    switch (component) {
      case ProjectorComponent::input_fc:
      case ProjectorComponent::output_fc: {
        const std::string prefix = component == ProjectorComponent::input_fc ? "fc1" : "fc2";
        layers::linear_forward(cur.data(), n, d, params.at(prefix + ".weight").value.data(),
                               params.at(prefix + ".bias").value.data(), d, next.data());
        break;
      }
      case ProjectorComponent::bn: {
        const double* rmean = nullptr;
        const double* rvar = nullptr;
        double* umean = nullptr;
        double* uvar = nullptr;
        if (mode == BatchNormMode::running_stats) {
          if (!stats.read) throw ConfigError("projector: running statistics required");
          rmean = stats.read->at("bn.running_mean").value.data();
          rvar = stats.read->at("bn.running_var").value.data();
        } else if (mode == BatchNormMode::batch_stats_update) {
          if (!stats.write) throw ConfigError("projector: running statistics target required");
          umean = stats.write->at("bn.running_mean").value.data();
          uvar = stats.write->at("bn.running_var").value.data();
        }
        layers::batchnorm_forward(layers::BnLayout{d, n, 1, d}, cur.data(),
                                  params.at("bn.weight").value.data(),
                                  params.at("bn.bias").value.data(), mode, rmean, rvar, umean,
                                  uvar, next.data(), tape ? &tape->bn : nullptr);
        break;
      }
      case ProjectorComponent::relu:
        next = cur;
        layers::relu_forward(next.values());
        break;
    }
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
ParamGroup<T> Projector::backward(const ParamGroup<T>& params, const ProjectorTape<T>& tape,
                                  const Tensor<T>& grad_output, Tensor<T>* grad_input) const {
  const std::size_t d = config_.feature_dim;
  const std::size_t n = grad_output.dim(0);
  ParamGroup<T> grads = zeros_like(params);
  Tensor<T> grad = grad_output;
  const auto pipeline = config_.pipeline();
  for (std::size_t s = pipeline.size(); s-- > 0;) {
    const Tensor<T>& input = tape.stage_inputs[s];
    Tensor<T> dx({n, d});
    switch (pipeline[s]) {
      case ProjectorComponent::input_fc:
      case ProjectorComponent::output_fc: {
        const std::string prefix = pipeline[s] == ProjectorComponent::input_fc ? "fc1" : "fc2";
        layers::linear_backward(input.data(), n, d, params.at(prefix + ".weight").value.data(), d,
                                grad.data(), grads.at(prefix + ".weight").value.data(),
                                grads.at(prefix + ".bias").value.data(), dx.data());
        break;
      }
      case ProjectorComponent::bn:
        layers::batchnorm_backward(layers::BnLayout{d, n, 1, d}, grad.data(),
                                   params.at("bn.weight").value.data(), tape.bn, dx.data(),
                                   grads.at("bn.weight").value.data(),
                                   grads.at("bn.bias").value.data());
        break;
      case ProjectorComponent::relu:
        dx = grad;
        layers::relu_backward(input.values(), dx.values());
        break;
    }
    grad = std::move(dx);
  }
  if (grad_input) *grad_input = std::move(grad);
  return grads;
}

Tensor<double> ProjectorMap::operator()(const Tensor<double>& x) const {
  return projector.forward(params, BatchNormMode::batch_stats, RunningStats{&buffers, nullptr}, x,
                           static_cast<ProjectorTape<double>*>(nullptr));
}

ProjectorMap build_projector(const ProjectorConfig& config, std::uint64_t seed) {
  Projector p(config);
  auto params = p.init_params(seed);
  auto buffers = p.init_buffers();
  return {std::move(p), std::move(params), std::move(buffers)};
}

template Tensor<double> Projector::forward<double>(const ParamGroup<double>&, BatchNormMode,
                                                   RunningStats, const Tensor<double>&,
                                                   ProjectorTape<double>*) const;
template Tensor<Dual> Projector::forward<Dual>(const ParamGroup<Dual>&, BatchNormMode,
                                               RunningStats, const Tensor<Dual>&,
                                               ProjectorTape<Dual>*) const;
template ParamGroup<double> Projector::backward<double>(const ParamGroup<double>&,
                                                        const ProjectorTape<double>&,
                                                        const Tensor<double>&,
                                                        Tensor<double>*) const;
template ParamGroup<Dual> Projector::backward<Dual>(const ParamGroup<Dual>&,
                                                    const ProjectorTape<Dual>&,
                                                    const Tensor<Dual>&, Tensor<Dual>*) const;

}  // namespace fewshot
