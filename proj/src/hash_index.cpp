#include "iahash/hash_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

int hamming_distance(const BitCode& a, const BitCode& b) {
  if (a.bits != b.bits)
    throw std::invalid_argument("hamming_distance: code lengths differ: " + std::to_string(a.bits) +
                                " vs " + std::to_string(b.bits));
  int d = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w)
    d += std::popcount(a.words[w] ^ b.words[w]);
  return d;
}

std::size_t GroupedIndex::table_size(int j) const {
  std::size_t n = 0;
  for (const auto& [code, entries] : tables[std::size_t(j)]) n += entries.size();
  return n;
}

GroupedIndex build_index(std::span<const CodeBundle> bundles, double threshold) {
  GroupedIndex index;
  index.threshold = threshold;
  if (bundles.empty()) return index;
  index.categories = bundles.front().categories;
  index.code_bits = bundles.front().code_bits;
  index.tables.resize(std::size_t(index.categories));

  std::set<std::int64_t> seen;
  for (const auto& bundle : bundles) {
    if (bundle.categories != index.categories || bundle.code_bits != index.code_bits)
      throw std::invalid_argument("build_index: bundle " + std::to_string(bundle.id) +
                                  " has inconsistent shape");
    if (!seen.insert(bundle.id).second)
      throw std::invalid_argument("build_index: duplicate image id " + std::to_string(bundle.id));
    for (int j = 0; j < index.categories; ++j) {
      const double p = bundle.probabilities[std::size_t(j)];
      if (p >= threshold)
        index.tables[std::size_t(j)][bundle.category_codes[std::size_t(j)]].push_back(
            IndexEntry{bundle.id, p});
    }
  }
  for (auto& table : index.tables)
    for (auto& [code, entries] : table)
      std::sort(entries.begin(), entries.end(),
                [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
  return index;
}

namespace {
std::vector<RankedHit> rank_table(const std::map<BitCode, std::vector<IndexEntry>>& table,
                                  const BitCode& query, int top_k) {
  std::vector<RankedHit> hits;
  for (const auto& [code, entries] : table) {
    const int d = hamming_distance(query, code);
    for (const auto& e : entries) hits.push_back(RankedHit{e.id, d});
  }
  std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  if (top_k >= 0 && int(hits.size()) > top_k) hits.resize(std::size_t(top_k));
  return hits;
}
}  // namespace

std::vector<RankedHit> rank_category(const GroupedIndex& index, int category, const BitCode& code,
                                     int top_k) {
  if (category < 0 || std::size_t(category) >= index.tables.size())
    throw std::invalid_argument("rank_category: category out of range");
  return rank_table(index.tables[std::size_t(category)], code, top_k);
}

QueryResult query_category_aware(const CodeBundle& query, const GroupedIndex& index,
                                 double threshold, int top_k) {
  if (index.categories > 0 && query.categories != index.categories)
    throw std::invalid_argument("query: category count mismatch");
  if (index.categories > 0 && query.code_bits != index.code_bits)
    throw std::invalid_argument("query: code length mismatch: query " +
                                std::to_string(query.code_bits) + " vs index " +
                                std::to_string(index.code_bits));
  QueryResult out;
  out.groups.resize(std::size_t(query.categories));
  for (int j = 0; j < query.categories; ++j) {
    if (query.probabilities[std::size_t(j)] < threshold) continue;
    out.retained.push_back(j);
    if (j < index.categories)
      out.groups[std::size_t(j)] =
          rank_table(index.tables[std::size_t(j)], query.category_codes[std::size_t(j)], top_k);
  }
  return out;
}

std::vector<RankedHit> rank_semantic(const BitCode& query, std::span<const CodeBundle> database,
                                     int top_k) {
  std::vector<RankedHit> hits;
  hits.reserve(database.size());
  for (const auto& bundle : database) {
    if (bundle.semantic_bits != query.bits)
      throw std::invalid_argument("rank_semantic: code length mismatch for image " +
                                  std::to_string(bundle.id));
    hits.push_back(RankedHit{bundle.id, hamming_distance(query, bundle.semantic_code)});
  }
  std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  if (top_k >= 0 && int(hits.size()) > top_k) hits.resize(std::size_t(top_k));
  return hits;
}

std::vector<double> saliency_map(const Scene& scene, std::span<const Proposal> proposals,
                                 const Matrix& prop_prob, int category) {
  if (proposals.size() != prop_prob.rows)
    throw std::invalid_argument("saliency_map: " + std::to_string(proposals.size()) +
                                " proposals vs " + std::to_string(prop_prob.rows) +
                                " probability rows");
  if (category < 0 || std::size_t(category) >= prop_prob.cols)
    throw std::invalid_argument("saliency_map: category out of range");
  std::vector<double> map(std::size_t(scene.height) * scene.width, 0.0);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const Box& box = proposals[i].box;
    const double p = prop_prob(i, std::size_t(category));
    for (int y = box.y1; y < box.y2; ++y)
      for (int x = box.x1; x < box.x2; ++x) map[std::size_t(y) * scene.width + x] += p;
  }
  double peak = 0.0;
  for (double v : map) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : map) v /= peak;
  return map;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> gray, int width,
               int height) {
  if (gray.size() != std::size_t(width) * std::size_t(height))
    throw std::invalid_argument("write_pgm: buffer size does not match dimensions");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open image for writing: " + path.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  for (double v : gray) {
    int byte = int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    os.put(char(byte));
  }
  if (!os) throw std::runtime_error("failed writing image: " + path.string());
}

void write_index(const std::filesystem::path& path, const GroupedIndex& index) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open index for writing: " + path.string());
  os << "iahash-index 1\n";
  os << index.categories << ' ' << index.code_bits << ' ' << format_double(index.threshold) << '\n';
  for (int j = 0; j < index.categories; ++j) {
    os << "table " << j << ' ' << index.table_size(j) << '\n';
    for (const auto& [code, entries] : index.tables[std::size_t(j)])
      for (const auto& e : entries)
        os << code.to_hex() << ' ' << e.id << ' ' << format_double(e.probability) << '\n';
  }
  if (!os) throw std::runtime_error("failed writing index: " + path.string());
}

GroupedIndex read_index(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing index file: " + path.string());
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "iahash-index" || version != 1)
    throw ValidationError("index: unrecognized header in " + path.string());
  GroupedIndex index;
  if (!(is >> index.categories >> index.code_bits >> index.threshold) || index.categories < 1 ||
      index.code_bits < 1)
    throw ValidationError("index: bad shape line in " + path.string());
  index.tables.resize(std::size_t(index.categories));
  for (int j = 0; j < index.categories; ++j) {
    std::size_t count = 0;
    int table_id = -1;
    if (!(is >> word >> table_id >> count) || word != "table" || table_id != j)
      throw ValidationError("index: bad table header for table " + std::to_string(j));
    for (std::size_t k = 0; k < count; ++k) {
      std::string hex;
      IndexEntry entry;
      if (!(is >> hex >> entry.id >> entry.probability))
        throw ValidationError("index: truncated entry " + std::to_string(k) + " in table " +
                              std::to_string(j));
      index.tables[std::size_t(j)][BitCode::from_hex(hex, index.code_bits)].push_back(entry);
    }
  }
  return index;
}

}  // namespace iahash
