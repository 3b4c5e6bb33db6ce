#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "iahash/bitcode.hpp"
#include "iahash/hashcode.hpp"
#include "iahash/matrix.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

// Number of differing bits, via XOR + popcount over the packed words.
int hamming_distance(const BitCode& a, const BitCode& b);

struct IndexEntry {
  std::int64_t id = 0;
  double probability = 0.0;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

// c hash tables; table j holds the j-th piece of code of every image whose
// probability for category j passed the threshold. Buckets are keyed by the
// exact code, entries sorted by id.
struct GroupedIndex {
  int categories = 0;
  int code_bits = 0;
  double threshold = 0.2;
  std::vector<std::map<BitCode, std::vector<IndexEntry>>> tables;

  std::size_t table_size(int j) const;
};

GroupedIndex build_index(std::span<const CodeBundle> bundles, double threshold);

struct RankedHit {
  std::int64_t id = 0;
  int distance = 0;
  friend bool operator==(const RankedHit&, const RankedHit&) = default;
};

// Per retained category (query probability >= threshold): all table entries
// ranked by Hamming distance, ties by ascending id, truncated to top_k.
// Groups of dropped categories stay empty.
struct QueryResult {
  std::vector<int> retained;
  std::vector<std::vector<RankedHit>> groups;
};

QueryResult query_category_aware(const CodeBundle& query, const GroupedIndex& index,
                                 double threshold, int top_k);

// Ranks one table against a code; top_k < 0 returns the whole table.
std::vector<RankedHit> rank_category(const GroupedIndex& index, int category, const BitCode& code,
                                     int top_k);

// Hamming ranking over the single semantic code.
std::vector<RankedHit> rank_semantic(const BitCode& query, std::span<const CodeBundle> database,
                                     int top_k);

// Per-pixel sum of P[i][category] over the proposals covering the pixel,
// normalized by the global maximum (an all-zero map stays zero).
std::vector<double> saliency_map(const Scene& scene, std::span<const Proposal> proposals,
                                 const Matrix& prop_prob, int category);

// Binary 8-bit PGM (P5); values expected in [0, 1].
void write_pgm(const std::filesystem::path& path, std::span<const double> gray, int width,
               int height);

void write_index(const std::filesystem::path& path, const GroupedIndex& index);
GroupedIndex read_index(const std::filesystem::path& path);

}  // namespace iahash
