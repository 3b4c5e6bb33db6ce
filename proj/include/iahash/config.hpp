#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iahash/model.hpp"
#include "iahash/synthdata.hpp"
#include "iahash/trainer.hpp"

namespace iahash {

// One document holding every knob of the pipeline. Parsed from plain-text
// `key=value` lines; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;

  SceneConfig scene;
  int num_proposals = 16;
  double jitter = 0.2;
  std::int64_t train_size = 2000;
  std::int64_t database_size = 800;
  std::int64_t query_size = 200;

  ModelConfig model;
  TrainConfig train;

  double threshold = 0.2;  // probability threshold for index membership
  int top_k = 10;
  int eval_at = 100;       // position for NDCG@m / ACG@m in reports

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(const std::string& text);

// Reads the file and applies `key=value` overrides in order.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

// Cross-field consistency; throws ValidationError naming the offending keys.
void validate(const RunConfig& cfg);

// Every key in sorted order with the effective value; the config hash is the
// FNV-1a of this string.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

// A fully commented sample document with the default values.
std::string default_config_text();

}  // namespace iahash
