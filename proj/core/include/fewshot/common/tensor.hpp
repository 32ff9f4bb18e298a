#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fewshot/common/error.hpp"

namespace fewshot {

using Dims = std::vector<std::size_t>;

std::string dims_to_string(const Dims& dims);

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

/// Dense row-major array with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, T fill = T(0))
      : dims_(std::move(dims)), data_(dims_product(dims_), fill) {}
  Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != dims_product(dims_)) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match dims " + dims_to_string(dims_));
    }
  }

  [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
  [[nodiscard]] std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  [[nodiscard]] std::size_t rank() const noexcept { return dims_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element access for rank-2 tensors.
  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * dims_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * dims_[1] + c];
  }

  /// Row view for rank-2 tensors.
  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * dims_[1], dims_[1]}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * dims_[1], dims_[1]};
  }

  void reshape(Dims dims) {
    if (dims_product(dims) != data_.size()) {
      throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
    }
    dims_ = std::move(dims);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

using Matrix = Tensor<double>;

}  // namespace fewshot
