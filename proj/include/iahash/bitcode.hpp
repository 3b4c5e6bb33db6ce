#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iahash {

// Fixed-length binary code packed into 64-bit words. Bit k lives at
// words[k / 64], bit position (k % 64).
struct BitCode {
  int bits = 0;
  std::vector<std::uint64_t> words;

  BitCode() = default;
  explicit BitCode(int n) : bits(n), words((n + 63) / 64, 0) {}

  bool get(int k) const { return (words[std::size_t(k) >> 6] >> (k & 63)) & 1u; }
  void set(int k, bool v) {
    std::uint64_t mask = 1ull << (k & 63);
    if (v)
      words[std::size_t(k) >> 6] |= mask;
    else
      words[std::size_t(k) >> 6] &= ~mask;
  }

  // Hex form, one digit per 4 bits; bit 0 is the most significant bit of the
  // first digit. Trailing pad bits (when bits % 4 != 0) are zero.
  std::string to_hex() const;
  static BitCode from_hex(const std::string& hex, int bits);

  friend bool operator==(const BitCode& a, const BitCode& b) = default;
  // Lexicographic on the bit sequence; used for deterministic table order.
  bool operator<(const BitCode& other) const;
};

}  // namespace iahash
