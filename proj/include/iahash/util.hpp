#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iahash {

// Raised for malformed configs, bad CLI values and artifact headers that
// fail validation. The CLI maps it to exit status 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent RNG streams.
std::uint64_t mix64(std::uint64_t z);

// FNV-1a over a byte string. Used for config and artifact content hashes.
std::uint64_t fnv1a64(std::string_view bytes);

// Shortest decimal form that round-trips a double ("%.17g").
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);
std::int64_t parse_int(const std::string& s, const std::string& what);

std::string base64_encode(const void* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string to_hex_u64(std::uint64_t v);

// Runs fn(0..n-1) on up to `threads` workers (<=1 or n<2 runs inline).
// Iterations must be independent; any ordered reduction is the caller's job.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace iahash
