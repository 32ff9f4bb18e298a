#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fewshot/data/dataset.hpp"

namespace fewshot {

enum class ShiftKind { none, channel_affine, hue_permutation, blur };

std::string to_string(ShiftKind kind);
ShiftKind parse_shift_kind(std::string_view text);

/// Domain-level pixel transform standing in for a cross-domain gap.
///   channel_affine:  x_c -> x_c * (1 + m a_c) + m b_c, with a_c in [-0.5, 0.5]
///                    and |b_c| in [0.2, 0.5] drawn from `seed`
///   hue_permutation: x_c -> (1 - m) x_c + m x_{pi(c)} for a seeded cyclic
///                    channel rotation pi; m must lie in [0, 1]
///   blur:            separable Gaussian blur with sigma = 1.5 m pixels
/// Magnitude 0 (or kind none) leaves pixels untouched.
struct ShiftSpec {
  ShiftKind kind = ShiftKind::none;
  double magnitude = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

/// Everything needed to regenerate a synthetic domain bit-exactly.
struct SyntheticSpec {
  std::string name;  ///< empty selects default_name()
  std::uint64_t base_seed = 0;
  std::size_t classes = 8;
  std::size_t items_per_class = 40;
  ImageShape shape;
  ShiftSpec shift;
  /// When false every class shares one pattern, leaving no class signal
  /// (null-signal control data).
  bool distinct_classes = true;

  [[nodiscard]] std::string default_name() const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Procedural class-structured images: each class is an oriented colored
/// grating plus a colored Gaussian blob; items vary phase, blob position,
/// contrast, brightness and pixel noise. A pure function of the spec.
LabeledDataset make_synthetic_domain(const SyntheticSpec& spec);

LabeledDataset make_synthetic_domain(std::uint64_t base_seed, std::size_t classes,
                                     std::size_t items_per_class, ImageShape shape,
                                     ShiftSpec shift);

/// Applies `shift` to one (channels, height, width) image in place.
void apply_shift(std::span<float> pixels, const ImageShape& shape, const ShiftSpec& shift);

void write_manifest(const std::filesystem::path& path, const SyntheticSpec& spec);
SyntheticSpec read_manifest(const std::filesystem::path& path);

}  // namespace fewshot
