#include "iahash/bitcode.hpp"

#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

namespace {
int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::string BitCode::to_hex() const {
  const int digits = (bits + 3) / 4;
  std::string out(std::size_t(digits), '0');
  for (int k = 0; k < bits; ++k) {
    if (!get(k)) continue;
    int d = k / 4;
    int shift = 3 - (k % 4);
    int v = hex_digit(out[std::size_t(d)]);
    v |= 1 << shift;
    out[std::size_t(d)] = "0123456789abcdef"[v];
  }
  return out;
}

BitCode BitCode::from_hex(const std::string& hex, int bits) {
  const int digits = (bits + 3) / 4;
  if (int(hex.size()) != digits)
    throw ValidationError("code: expected " + std::to_string(digits) + " hex digits for " +
                          std::to_string(bits) + " bits, got " + std::to_string(hex.size()));
  BitCode code(bits);
  for (int d = 0; d < digits; ++d) {
    int v = hex_digit(hex[std::size_t(d)]);
    if (v < 0) throw ValidationError(std::string("code: bad hex digit '") + hex[std::size_t(d)] + "'");
    for (int s = 0; s < 4; ++s) {
      int k = d * 4 + s;
      bool bit = (v >> (3 - s)) & 1;
      if (k >= bits) {
        if (bit) throw ValidationError("code: nonzero pad bit beyond " + std::to_string(bits) + " bits");
        continue;
      }
      code.set(k, bit);
    }
  }
  return code;
}

bool BitCode::operator<(const BitCode& other) const {
  if (bits != other.bits) return bits < other.bits;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w] != other.words[w]) {
      // Compare the first differing bit (lowest index = earliest feature).
      std::uint64_t diff = words[w] ^ other.words[w];
      std::uint64_t lowest = diff & (~diff + 1);
      return (other.words[w] & lowest) != 0;
    }
  }
  return false;
}

}  // namespace iahash
