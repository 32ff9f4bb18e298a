#include "fewshot/model/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace fewshot {

void SgdMomentum::step(ParamSet<double>& params, const ParamSet<double>& grads, double lr) {
  if (!initialized_) {
    velocity_ = zeros_like(params);
    initialized_ = true;
  }
  for (GroupId id : kAllGroups) {
    auto& pg = params.group(id);
    const auto& gg = grads.group(id);
    if (gg.params.empty()) continue;  // group not trained
    auto& vg = velocity_.group(id);
    for (std::size_t i = 0; i < pg.params.size(); ++i) {
      auto& w = pg.params[i].value;
      const auto& g = gg.params[i].value;
      auto& v = vg.params[i].value;
      for (std::size_t j = 0; j < w.size(); ++j) {
        v[j] = config_.momentum * v[j] + g[j] + config_.weight_decay * w[j];
        w[j] -= lr * v[j];
      }
    }
  }
}

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace fewshot
