#pragma once

#include <filesystem>
#include <vector>

#include "fewshot/common/image_shape.hpp"

namespace fewshot {

/// Decoded image, (channels, height, width) planar floats in [0, 1].
struct RawImage {
  ImageShape shape;
  std::vector<float> pixels;
};

/// Decodes PNG (8/16-bit, gray or color) and binary or ASCII PNM
/// (P2/P3/P5/P6). Throws IoError naming the path when the file cannot be
/// decoded.
RawImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG; values are clamped to [0, 1]. Supports 1 or 3
/// channels.
void write_png(const std::filesystem::path& path, const ImageShape& shape,
               const std::vector<float>& pixels);

/// Bilinear resize (pixel-center aligned) plus channel adaptation: gray is
/// replicated to color, color is averaged to gray.
std::vector<float> resize_image(const RawImage& image, const ImageShape& target);

}  // namespace fewshot
