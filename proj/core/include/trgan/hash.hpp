#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <type_traits>

namespace trgan {

/// 64-bit FNV-1a. Used for config and parameter digests.
class Fnv1a {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void update_pod(const T& v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    update(buf, sizeof(T));
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stage seed derivation: splitmix64(master XOR fnv1a(stage)).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  Fnv1a h;
  h.update(stage);
  return splitmix64(master ^ h.value());
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
  return splitmix64(derive_seed(master, stage) ^ splitmix64(index));
}

}  // namespace trgan
