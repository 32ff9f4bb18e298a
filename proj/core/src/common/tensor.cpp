#include "fewshot/common/tensor.hpp"

namespace fewshot {

std::string dims_to_string(const Dims& dims) {
  std::string out = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(dims[i]);
  }
  return out + ")";
}

}  // namespace fewshot

#include <charconv>

#include "fewshot/common/image_shape.hpp"

namespace fewshot {

std::string to_string(const ImageShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

ImageShape parse_image_shape(std::string_view text) {
  std::size_t values[3] = {0, 0, 0};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 3; ++i) {
    auto [next, ec] = std::from_chars(p, end, values[i]);
    if (ec != std::errc{} || values[i] == 0) {
      throw ConfigError("invalid image shape '" + std::string(text) + "' (expected CxHxW)");
    }
    p = next;
    if (i < 2) {
      if (p == end || *p != 'x') {
        throw ConfigError("invalid image shape '" + std::string(text) + "' (expected CxHxW)");
      }
      ++p;
    }
  }
  if (p != end) throw ConfigError("invalid image shape '" + std::string(text) + "'");
  return {values[0], values[1], values[2]};
}

}  // namespace fewshot
