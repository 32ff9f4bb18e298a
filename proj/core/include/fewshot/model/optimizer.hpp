#pragma once

#include <cstddef>

#include "fewshot/model/params.hpp"

namespace fewshot {

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
///   v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
/// Groups with an empty gradient are left unchanged.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig config = {}) : config_(config) {}

  void step(ParamSet<double>& params, const ParamSet<double>& grads, double lr);

  [[nodiscard]] const SgdConfig& config() const noexcept { return config_; }

 private:
  SgdConfig config_;
  ParamSet<double> velocity_;
  bool initialized_ = false;
};

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); step is 0-based.
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

}  // namespace fewshot
