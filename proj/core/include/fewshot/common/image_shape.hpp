#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fewshot {

struct ImageShape {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;

  [[nodiscard]] std::size_t pixel_count() const noexcept { return channels * height * width; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// "3x32x32" <-> ImageShape.
std::string to_string(const ImageShape& shape);
ImageShape parse_image_shape(std::string_view text);

}  // namespace fewshot
