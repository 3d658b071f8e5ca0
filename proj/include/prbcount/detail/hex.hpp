#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace prbcount::detail {

inline char hex_digit(unsigned v) {
  return static_cast<char>(v < 10 ? '0' + v : 'a' + (v - 10));
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(hex_digit(b >> 4));
    out.push_back(hex_digit(b & 0x0f));
  }
  return out;
}

inline unsigned hex_value(char c) {
  if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
  if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
  if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
  throw std::invalid_argument(std::string("invalid hex digit: ") + c);
}

// Decodes exactly out.size() bytes; the input must have matching length.
inline void from_hex(const std::string& hex, std::span<std::uint8_t> out) {
  if (hex.size() != out.size() * 2)
    throw std::invalid_argument("hex string has wrong length");
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((hex_value(hex[2 * i]) << 4) | hex_value(hex[2 * i + 1]));
}

}  // namespace prbcount::detail
