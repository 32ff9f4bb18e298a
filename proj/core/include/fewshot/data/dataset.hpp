#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fewshot/common/image_shape.hpp"
#include "fewshot/common/tensor.hpp"

namespace fewshot {

struct ImageRecord {
  std::vector<float> pixels;  ///< (channels, height, width), values nominally in [0, 1]
  std::string source;         ///< file path or generator provenance
};

/// Address of one item: class index into LabeledDataset::classes() and item
/// index within that class.
struct ItemRef {
  std::size_t class_index = 0;
  std::size_t item_index = 0;

  friend auto operator<=>(const ItemRef&, const ItemRef&) = default;
};

/// Immutable labeled image collection. Every class has at least one item and
/// class identifiers are unique.
class LabeledDataset {
 public:
  LabeledDataset(std::string name, ImageShape shape, std::vector<std::string> classes,
                 std::vector<std::vector<ImageRecord>> items);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const ImageShape& shape() const noexcept { return shape_; }
  [[nodiscard]] const std::vector<std::string>& classes() const noexcept { return classes_; }
  [[nodiscard]] std::size_t class_count() const noexcept { return classes_.size(); }
  [[nodiscard]] std::size_t items_in_class(std::size_t c) const { return items_.at(c).size(); }
  [[nodiscard]] std::size_t total_items() const noexcept { return total_; }
  [[nodiscard]] const ImageRecord& item(const ItemRef& ref) const {
    return items_.at(ref.class_index).at(ref.item_index);
  }
  [[nodiscard]] const std::vector<std::vector<ImageRecord>>& items() const noexcept {
    return items_;
  }

  /// Every item in class-major order.
  [[nodiscard]] std::vector<ItemRef> all_items() const;

  /// Stacks the referenced images into an (n, c, h, w) tensor.
  [[nodiscard]] Tensor<double> gather(std::span<const ItemRef> refs) const;

  /// Content hash over name, class ids, shape and pixel bytes.
  [[nodiscard]] const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string name_;
  ImageShape shape_;
  std::vector<std::string> classes_;
  std::vector<std::vector<ImageRecord>> items_;
  std::size_t total_ = 0;
  std::string fingerprint_;
};

}  // namespace fewshot
