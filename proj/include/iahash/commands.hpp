#pragma once

#include <string>
#include <vector>

#include "iahash/config.hpp"
#include "iahash/hashcode.hpp"
#include "iahash/metrics.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

// Entry point behind the CLI binary. `args` excludes the program name.
// Returns 0 on success, 2 on validation errors, 1 otherwise.
int run_command(const std::vector<std::string>& args);

// The pieces the subcommands are built from, exposed for tests and bindings.

ModelConfig effective_model_config(const RunConfig& cfg);

// Splits with globally unique ids: train, database, query (in id order).
struct GeneratedDataset {
  std::vector<SceneRecord> train;
  std::vector<SceneRecord> database;
  std::vector<SceneRecord> query;
};
GeneratedDataset generate_dataset(const RunConfig& cfg);
void write_dataset(const std::filesystem::path& dir, const RunConfig& cfg,
                   const GeneratedDataset& data);

std::vector<CodeBundle> encode_split(const ModelParams& params,
                                     const std::vector<SceneRecord>& records, int threads);

// The full metric report: semantic NDCG/ACG/MAP/weighted MAP when semantic
// codes are present, plus per-category MAP over the grouped index.
std::vector<ReportRow> evaluation_report(const std::vector<CodeBundle>& database,
                                         const std::vector<CodeBundle>& queries,
                                         const std::vector<SceneRecord>& database_records,
                                         const std::vector<SceneRecord>& query_records,
                                         double threshold, int eval_at);

}  // namespace iahash
