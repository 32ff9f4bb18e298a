#include "fewshot/data/dataset.hpp"

#include <algorithm>
#include <set>

#include "fewshot/common/error.hpp"
#include "fewshot/common/hash.hpp"

namespace fewshot {

LabeledDataset::LabeledDataset(std::string name, ImageShape shape,
                               std::vector<std::string> classes,
                               std::vector<std::vector<ImageRecord>> items)
    : name_(std::move(name)), shape_(shape), classes_(std::move(classes)), items_(std::move(items)) {
  if (classes_.size() != items_.size()) {
    throw DataError("dataset '" + name_ + "': " + std::to_string(classes_.size()) +
                    " class ids for " + std::to_string(items_.size()) + " item lists");
  }
  std::set<std::string> seen;
  Fnv1a64 h;
  h.update(name_);
  h.update(to_string(shape_));
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    if (!seen.insert(classes_[c]).second) {
      throw DataError("dataset '" + name_ + "': duplicate class id '" + classes_[c] + "'");
    }
    if (items_[c].empty()) {
      throw DataError("dataset '" + name_ + "': class '" + classes_[c] + "' has no items");
    }
    h.update(classes_[c]);
    for (const auto& rec : items_[c]) {
      if (rec.pixels.size() != shape_.pixel_count()) {
        throw ShapeError("dataset '" + name_ + "': item " + rec.source + " has " +
                         std::to_string(rec.pixels.size()) + " values, expected " +
                         std::to_string(shape_.pixel_count()));
      }
      h.update(std::as_bytes(std::span<const float>(rec.pixels)));
    }
    total_ += items_[c].size();
  }
  fingerprint_ = h.hex();
}

std::vector<ItemRef> LabeledDataset::all_items() const {
  std::vector<ItemRef> out;
  out.reserve(total_);
  for (std::size_t c = 0; c < items_.size(); ++c) {
    for (std::size_t i = 0; i < items_[c].size(); ++i) out.push_back({c, i});
  }
  return out;
}

Tensor<double> LabeledDataset::gather(std::span<const ItemRef> refs) const {
  const std::size_t per = shape_.pixel_count();
  Tensor<double> out({refs.size(), shape_.channels, shape_.height, shape_.width});
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const auto& px = item(refs[r]).pixels;
    std::copy(px.begin(), px.end(), out.data() + r * per);
  }
  return out;
}

}  // namespace fewshot
