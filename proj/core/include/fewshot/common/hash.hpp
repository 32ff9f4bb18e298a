#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace fewshot {

/// Incremental 64-bit FNV-1a. Stable across platforms and runs, which is all
/// the provenance hashes need; it is not a cryptographic digest.
class Fnv1a64 {
 public:
  void update(std::span<const std::byte> bytes) noexcept;
  void update(std::string_view text) noexcept;

  template <typename T>
  void update_pod(const T& value) noexcept {
    update(std::as_bytes(std::span<const T, 1>(&value, 1)));
  }

  [[nodiscard]] std::uint64_t digest() const noexcept { return state_; }
  [[nodiscard]] std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

[[nodiscard]] std::string fnv1a64_hex(std::string_view text);

}  // namespace fewshot
