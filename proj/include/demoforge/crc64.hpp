#pragma once

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace demoforge {

namespace detail {
inline constexpr std::array<std::uint64_t, 256> make_crc64_table() {
  constexpr std::uint64_t poly = 0xC96C5795D7870F42ull;  // reflected 0x42F0E1EBA9EA3693
  std::array<std::uint64_t, 256> t{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ poly : c >> 1;
    t[i] = c;
  }
  return t;
}
inline constexpr auto kCrc64Table = make_crc64_table();
}  // namespace detail

class Crc64 {
 public:
  void update(std::span<const std::byte> bytes) {
    for (std::byte b : bytes) {
      state_ = detail::kCrc64Table[(state_ ^ static_cast<std::uint8_t>(b)) & 0xff] ^ (state_ >> 8);
    }
  }
  void update(const void* data, std::size_t n) { update({static_cast<const std::byte*>(data), n}); }

  std::uint64_t value() const { return ~state_; }

 private:
  std::uint64_t state_ = ~0ull;
};

inline std::uint64_t crc64(std::span<const std::byte> bytes) {
  Crc64 c;
  c.update(bytes);
  return c.value();
}

}  // namespace demoforge
