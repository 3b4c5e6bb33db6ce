#include "iahash/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

namespace {
void check_position(const RankedRelevance& rel, int m, const char* what) {
  if (m < 1 || std::size_t(m) > rel.r.size())
    throw std::invalid_argument(std::string(what) + ": position " + std::to_string(m) +
                                " out of range 1.." + std::to_string(rel.r.size()));
}

double gain(int r) { return std::ldexp(1.0, r) - 1.0; }
}  // namespace

double ndcg_at(const RankedRelevance& rel, int m) {
  check_position(rel, m, "ndcg_at");
  double dcg = 0.0;
  for (int j = 1; j <= m; ++j) dcg += gain(rel.r[std::size_t(j - 1)]) / std::log2(1.0 + j);
  std::vector<int> ideal = rel.r;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double ideal_dcg = 0.0;
  for (int j = 1; j <= m; ++j) ideal_dcg += gain(ideal[std::size_t(j - 1)]) / std::log2(1.0 + j);
  if (ideal_dcg == 0.0) return 0.0;
  return dcg / ideal_dcg;
}

double acg_at(const RankedRelevance& rel, int m) {
  check_position(rel, m, "acg_at");
  double sum = 0.0;
  for (int j = 0; j < m; ++j) sum += rel.r[std::size_t(j)];
  return sum / m;
}

double average_precision(const RankedRelevance& rel) {
  if (rel.n_pos < 1) throw std::invalid_argument("average_precision: query has no relevant items");
  long hits = 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < rel.r.size(); ++j) {
    if (rel.r[j] >= 1) {
      ++hits;
      sum += double(hits) / double(j + 1);
    }
  }
  return sum / double(rel.n_pos);
}

double weighted_average_precision(const RankedRelevance& rel) {
  if (rel.n_pos < 1)
    throw std::invalid_argument("weighted_average_precision: query has no relevant items");
  double prefix = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < rel.r.size(); ++j) {
    prefix += rel.r[j];
    if (rel.r[j] >= 1) sum += prefix / double(j + 1);
  }
  return sum / double(rel.n_pos);
}

QuerySetMean mean_over_queries(std::span<const RankedRelevance> rels,
                               double (*per_query)(const RankedRelevance&)) {
  QuerySetMean out;
  double sum = 0.0;
  for (const auto& rel : rels) {
    if (rel.n_pos < 1) {
      ++out.excluded;
      continue;
    }
    sum += per_query(rel);
    ++out.included;
  }
  out.value = out.included > 0 ? sum / double(out.included) : 0.0;
  return out;
}

std::string render_report(std::span<const ReportRow> rows, std::span<const std::string> header_comments) {
  std::string out;
  for (const auto& c : header_comments) out += "# " + c + "\n";
  out += "metric,bits,value,num_queries\n";
  for (const auto& row : rows) {
    out += row.metric + "," + std::to_string(row.bits) + "," + format_double(row.value) + "," +
           std::to_string(row.num_queries) + "\n";
  }
  return out;
}

void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows,
                  std::span<const std::string> header_comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open report file for writing: " + path.string());
  out << render_report(rows, header_comments);
  if (!out) throw std::runtime_error("failed writing report: " + path.string());
}

}  // namespace iahash
