#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "iahash/model.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

struct TrainConfig {
  double base_lr = 0.0001;
  int batch_size = 32;
  int iterations = 15000;
  int lr_drop_epochs = 30;  // divide lr by 10 every this many epochs
  double w_cls = 1.0;       // classification loss weight
  double w_cat = 1.0;       // per-category triplet loss weight
  double w_sem = 1.0;       // weighted semantic triplet loss weight
  std::uint64_t seed = 1;
  int triplet_cap = 256;    // max semantic triplets per batch
  int cat_triplets = 4;     // sampled triplets per category per batch
  double margin = 1.0;
  int threads = 0;          // worker threads for per-image passes; 0 = auto

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

// All ordered triples (a, p, n) of distinct batch indices with
// shared_labels(a, p) > shared_labels(a, n), enumerated in lexicographic
// index order. Above `cap` the set is uniformly subsampled (seeded),
// preserving enumeration order.
std::vector<std::array<int, 3>> generate_triplets(const std::vector<LabelVector>& labels, int cap,
                                                  SeededRng& rng);

// Seeded random triples (a, p, n) with category j present in a and p and
// absent from n. Empty when the batch cannot supply them.
std::vector<std::array<int, 3>> sample_category_triplets(const std::vector<LabelVector>& labels,
                                                         int category, int count, SeededRng& rng);

// Epochs are nominal full passes: epoch(iter) = iter * batch_size / train_size.
// lr(epoch) = base_lr * 10^-(epoch / lr_drop_epochs).
double learning_rate_at(const TrainConfig& cfg, std::size_t train_size, std::int64_t iteration);

struct TraceRow {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss_cls = 0.0;
  double loss_cat = 0.0;
  double loss_sem = 0.0;
  double total = 0.0;
};

// Loss and averaged gradients for one batch. Triplet selection is a pure
// function of (cfg.seed, iteration), so this is deterministic and suitable
// for finite-difference spot checks.
struct BatchEval {
  TraceRow losses;
  ModelParams grads;
};
BatchEval evaluate_batch(const ModelParams& params, const std::vector<SceneRecord>& data,
                         std::span<const int> batch, const TrainConfig& cfg,
                         std::int64_t iteration);

std::vector<int> draw_batch(std::size_t data_size, int batch_size, std::uint64_t seed,
                            std::int64_t iteration);

struct TrainResult {
  ModelParams params;
  std::vector<TraceRow> trace;
};

TrainResult train(const std::vector<SceneRecord>& data, const ModelConfig& model_cfg,
                  const TrainConfig& cfg);

// Binary checkpoint: versioned header + little-endian 64-bit float blocks.
void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      std::uint64_t config_hash);
struct Checkpoint {
  ModelParams params;
  std::uint64_t config_hash = 0;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

// CSV loss trace: iter, lr, loss_cls, loss_cat, loss_sem, total.
void write_trace(const std::filesystem::path& path, std::span<const TraceRow> trace);

}  // namespace iahash
