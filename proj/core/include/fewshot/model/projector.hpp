#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/model/backbone.hpp"

namespace fewshot {

enum class ProjectorComponent { input_fc, bn, relu, output_fc };

const char* to_string(ProjectorComponent c);

/// Which parts of the fc -> BN -> ReLU -> fc projector are active. All widths
/// equal feature_dim.
struct ProjectorConfig {
  bool input_fc = true;
  bool bn = true;
  bool relu = true;
  bool output_fc = true;
  std::size_t feature_dim = 1;

  static ProjectorConfig full(std::size_t d) { return {true, true, true, true, d}; }
  static ProjectorConfig none(std::size_t d) { return {false, false, false, false, d}; }

  [[nodiscard]] bool is_identity() const noexcept {
    return !input_fc && !bn && !relu && !output_fc;
  }
  /// Enabled components in pipeline order.
  [[nodiscard]] std::vector<ProjectorComponent> pipeline() const;
  /// "none", "full", or a comma list such as "input_fc,bn".
  [[nodiscard]] std::string flags_string() const;

  friend bool operator==(const ProjectorConfig&, const ProjectorConfig&) = default;
};

/// Parses "none", "full" or a comma list of component names.
ProjectorConfig parse_projector_flags(std::string_view text, std::size_t feature_dim);

template <typename T>
struct ProjectorTape {
  std::vector<Tensor<T>> stage_inputs;  // input to each pipeline stage
  layers::BnCache<T> bn;
};

/// The MLP projector p_epsilon. Disabled components are skipped; with every
/// component disabled the forward pass returns its input unchanged.
class Projector {
 public:
  explicit Projector(ProjectorConfig config);

  [[nodiscard]] const ProjectorConfig& config() const noexcept { return config_; }

  [[nodiscard]] ParamGroup<double> init_params(std::uint64_t seed) const;
  [[nodiscard]] ParamGroup<double> init_buffers() const;

  /// x: (n, d) -> (n, d)
  template <typename T>
  Tensor<T> forward(const ParamGroup<T>& params, layers::BatchNormMode mode, RunningStats stats,
                    const Tensor<T>& x, ProjectorTape<T>* tape) const;

  /// Returns parameter gradients; writes the input gradient into grad_input.
  template <typename T>
  ParamGroup<T> backward(const ParamGroup<T>& params, const ProjectorTape<T>& tape,
                         const Tensor<T>& grad_output, Tensor<T>* grad_input) const;

 private:
  ProjectorConfig config_;
};

/// A projector bundled with its own parameters: a ready-to-apply d -> d map.
struct ProjectorMap {
  Projector projector;
  ParamGroup<double> params;
  ParamGroup<double> buffers;

  /// Training-mode application (batch statistics, buffers untouched).
  [[nodiscard]] Tensor<double> operator()(const Tensor<double>& x) const;
};

ProjectorMap build_projector(const ProjectorConfig& config, std::uint64_t seed);

/// Number of projector forward passes executed on the calling thread. Used to
/// audit which code paths route through the projector.
std::uint64_t projector_forward_count() noexcept;

}  // namespace fewshot
