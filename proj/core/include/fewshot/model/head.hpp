#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fewshot/model/params.hpp"

namespace fewshot {

enum class HeadKind { linear, cosine };
enum class HeadInit { zero, he };

std::string to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

inline constexpr double kCosineTemperature = 10.0;

struct HeadSpec {
  HeadKind kind = HeadKind::linear;
  std::size_t num_classes = 0;  ///< 0 means the model carries no classifier
  std::size_t feature_dim = 1;
  double temperature = kCosineTemperature;  ///< cosine logits scale
  HeadInit init = HeadInit::zero;

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

template <typename T>
struct HeadTape {
  Tensor<T> input;
};

/// Classifier g_omega. The linear kind computes x W^T + b. The cosine kind
/// computes temperature * cos(x, w_c) with norms smoothed as
/// sqrt(|v|^2 + 1e-12) so it stays differentiable at zero.
class ClassifierHead {
 public:
  explicit ClassifierHead(HeadSpec spec);

  [[nodiscard]] const HeadSpec& spec() const noexcept { return spec_; }

  /// Weight is stored as (num_classes, feature_dim); bias only for linear.
  [[nodiscard]] ParamGroup<double> init_params(std::uint64_t seed) const;

  template <typename T>
  Tensor<T> forward(const ParamGroup<T>& params, const Tensor<T>& x, HeadTape<T>* tape) const;

  template <typename T>
  ParamGroup<T> backward(const ParamGroup<T>& params, const HeadTape<T>& tape,
                         const Tensor<T>& grad_logits, Tensor<T>* grad_input) const;

 private:
  HeadSpec spec_;
};

}  // namespace fewshot
