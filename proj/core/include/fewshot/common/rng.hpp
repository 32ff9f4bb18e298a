#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace fewshot {

/// Seeded generator whose derived quantities (uniforms, normals, bounded
/// integers, shuffles) are computed from raw mt19937_64 output only, so that
/// every sampler and generator reproduces bit-exactly on any conforming
/// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent child seed from a parent seed and a label path,
/// e.g. derive_seed(seed, "theta") or derive_seed(seed, "item", {c, i}).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                          std::initializer_list<std::uint64_t> path = {});

}  // namespace fewshot
