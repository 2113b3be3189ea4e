#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace repcycle {

// 64-bit FNV-1a. Stable across platforms; used for config/template/palette
// fingerprints, not for security.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) {
    for (auto b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(std::as_bytes(std::span(s.data(), s.size()))); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace repcycle
