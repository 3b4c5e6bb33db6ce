#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace iahash {

// Graded relevance of one ranked result list. r[j] is the number of labels
// the j-th ranked image shares with the query; n_pos counts the relevant
// items (>= 1 shared label) in the whole database, whether or not they
// appear in the list.
struct RankedRelevance {
  std::vector<int> r;
  long n_pos = 0;
};

// DCG@m / ideal DCG@m with gain 2^r - 1 and log2(1 + rank) discount.
// The ideal ranking is the descending sort of r, which therefore must cover
// the full database. Returns 0 when the ideal DCG is 0.
double ndcg_at(const RankedRelevance& rel, int m);

// Mean of r over the top m positions.
double acg_at(const RankedRelevance& rel, int m);

// Average precision over the full list: sum_j P@j * pos(j) / n_pos,
// with P@j the fraction of relevant items in the top j. Requires n_pos >= 1.
double average_precision(const RankedRelevance& rel);

// Like average_precision but each hit is weighted by ACG@j.
double weighted_average_precision(const RankedRelevance& rel);

// Mean over a query set, skipping queries with n_pos = 0.
struct QuerySetMean {
  double value = 0.0;
  long included = 0;
  long excluded = 0;
};
QuerySetMean mean_over_queries(std::span<const RankedRelevance> rels,
                               double (*per_query)(const RankedRelevance&));

// One evaluation report line: `metric,bits,value,num_queries`.
struct ReportRow {
  std::string metric;
  int bits = 0;
  double value = 0.0;
  long num_queries = 0;
};

std::string render_report(std::span<const ReportRow> rows, std::span<const std::string> header_comments);
void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows,
                  std::span<const std::string> header_comments);

}  // namespace iahash
