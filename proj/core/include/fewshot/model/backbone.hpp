#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/common/image_shape.hpp"
#include "fewshot/model/layers.hpp"
#include "fewshot/model/params.hpp"

namespace fewshot {

enum class BackboneKind {
  conv32f_tiny,  ///< four [conv3x3(32), BN, ReLU, maxpool2] blocks
  conv64f,       ///< four [conv3x3(64), BN, ReLU, maxpool2] blocks
  resnet12,      ///< recognized but not built
};

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view text);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::conv32f_tiny;
  ImageShape input;

  /// Throws ConfigError for kinds that are not available or inputs too small
  /// for four pooling stages.
  void validate() const;
  [[nodiscard]] std::size_t filters() const;
  [[nodiscard]] std::size_t feature_dim() const;

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

inline constexpr std::size_t kConvBlocks = 4;

template <typename T>
struct BackboneTape {
  struct Block {
    std::size_t cin = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> input;      // (cin, n, h, w)
    layers::BnCache<T> bn;
    std::vector<T> activated;  // post-ReLU, (cout, n, h, w)
    std::vector<std::uint32_t> pool_argmax;
  };
  std::size_t batch = 0;
  std::vector<Block> blocks;
};

/// Where batch-norm layers read and write running statistics.
struct RunningStats {
  const ParamGroup<double>* read = nullptr;
  ParamGroup<double>* write = nullptr;
};

/// Convolutional feature extractor f_theta.
class Backbone {
 public:
  explicit Backbone(BackboneSpec spec);

  [[nodiscard]] const BackboneSpec& spec() const noexcept { return spec_; }

  /// He-style fan-in initialization for convolutions; BN scale 1, shift 0.
  [[nodiscard]] ParamGroup<double> init_params(std::uint64_t seed) const;
  /// Running mean 0, running variance 1.
  [[nodiscard]] ParamGroup<double> init_buffers() const;

  /// images: (n, c, h, w) in the spec's input shape. Returns (n, feature_dim).
  template <typename T>
  Tensor<T> forward(const ParamGroup<T>& params, layers::BatchNormMode mode, RunningStats stats,
                    const Tensor<T>& images, BackboneTape<T>* tape) const;

  template <typename T>
  ParamGroup<T> backward(const ParamGroup<T>& params, const BackboneTape<T>& tape,
                         const Tensor<T>& grad_features) const;

  /// Throws ShapeError naming expected vs actual dims.
  void check_input(const Dims& dims) const;

 private:
  BackboneSpec spec_;
};

}  // namespace fewshot
