#include "iahash/commands.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>

#include "iahash/hash_index.hpp"
#include "iahash/model.hpp"
#include "iahash/trainer.hpp"
#include "iahash/util.hpp"

namespace iahash {

namespace {
constexpr std::uint64_t kStreamScene = 0xD474;
constexpr std::uint64_t kStreamProposals = 0xD475;
}  // namespace

ModelConfig effective_model_config(const RunConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.categories = cfg.scene.categories;
  mc.in_channels = cfg.scene.channels;
  return mc;
}

GeneratedDataset generate_dataset(const RunConfig& cfg) {
  validate(cfg);
  GeneratedDataset data;
  std::int64_t next_id = 0;
  auto fill = [&](std::vector<SceneRecord>& out, std::int64_t count) {
    out.reserve(std::size_t(count));
    for (std::int64_t i = 0; i < count; ++i, ++next_id) {
      SceneRecord rec;
      SeededRng scene_rng = SeededRng::derived(cfg.seed, kStreamScene, std::uint64_t(next_id));
      rec.scene = generate_scene(scene_rng, cfg.scene);
      rec.scene.id = next_id;
      SeededRng prop_rng = SeededRng::derived(cfg.seed, kStreamProposals, std::uint64_t(next_id));
      rec.proposals = generate_proposals(rec.scene, cfg.num_proposals, prop_rng, cfg.jitter);
      out.push_back(std::move(rec));
    }
  };
  fill(data.train, cfg.train_size);
  fill(data.database, cfg.database_size);
  fill(data.query, cfg.query_size);
  return data;
}

void write_dataset(const std::filesystem::path& dir, const RunConfig& cfg,
                   const GeneratedDataset& data) {
  write_split(dir, "train", data.train);
  write_split(dir, "database", data.database);
  write_split(dir, "query", data.query);
  DatasetManifest manifest;
  manifest.categories = cfg.scene.categories;
  manifest.channels = cfg.scene.channels;
  manifest.height = cfg.scene.height;
  manifest.width = cfg.scene.width;
  manifest.proposals_per_image = cfg.num_proposals;
  manifest.seed = cfg.seed;
  manifest.config_hash = config_hash(cfg);
  manifest.split_sizes["train"] = std::int64_t(data.train.size());
  manifest.split_sizes["database"] = std::int64_t(data.database.size());
  manifest.split_sizes["query"] = std::int64_t(data.query.size());
  write_manifest(dir, manifest);
}

std::vector<CodeBundle> encode_split(const ModelParams& params,
                                     const std::vector<SceneRecord>& records, int threads) {
  std::vector<CodeBundle> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    out[i] = encode_image(records[i].scene, records[i].proposals, params);
  });
  return out;
}

namespace {

std::map<std::int64_t, const LabelVector*> labels_by_id(const std::vector<SceneRecord>& records) {
  std::map<std::int64_t, const LabelVector*> out;
  for (const auto& rec : records) out[rec.scene.id] = &rec.scene.labels;
  return out;
}

const LabelVector& label_of(const std::map<std::int64_t, const LabelVector*>& table,
                            std::int64_t id) {
  auto it = table.find(id);
  if (it == table.end())
    throw std::runtime_error("evaluate: image id " + std::to_string(id) +
                             " has codes but no ground truth record");
  return *it->second;
}

}  // namespace

std::vector<ReportRow> evaluation_report(const std::vector<CodeBundle>& database,
                                         const std::vector<CodeBundle>& queries,
                                         const std::vector<SceneRecord>& database_records,
                                         const std::vector<SceneRecord>& query_records,
                                         double threshold, int eval_at) {
  if (database.empty() || queries.empty())
    throw std::runtime_error("evaluate: empty database or query codes");
  auto db_labels = labels_by_id(database_records);
  auto q_labels = labels_by_id(query_records);

  std::vector<ReportRow> rows;

  // Semantic Hamming ranking metrics over the full database.
  const bool semantic = database.front().semantic_bits > 0 && queries.front().semantic_bits > 0;
  if (semantic) {
    const int bits = queries.front().semantic_bits;
    std::vector<RankedRelevance> rels(queries.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto& query = queries[qi];
      const LabelVector& ql = label_of(q_labels, query.id);
      auto ranking = rank_semantic(query.semantic_code, database, -1);
      RankedRelevance rel;
      rel.r.reserve(ranking.size());
      for (const auto& hit : ranking)
        rel.r.push_back(shared_labels(ql, label_of(db_labels, hit.id)));
      for (int r : rel.r)
        if (r >= 1) ++rel.n_pos;
      rels[qi] = std::move(rel);
    }
    const int at = std::min<int>(eval_at, int(database.size()));
    double ndcg_sum = 0.0, acg_sum = 0.0;
    long included = 0, excluded = 0;
    double map_sum = 0.0, wmap_sum = 0.0;
    for (const auto& rel : rels) {
      if (rel.n_pos < 1) {
        ++excluded;
        continue;
      }
      ndcg_sum += ndcg_at(rel, at);
      acg_sum += acg_at(rel, at);
      map_sum += average_precision(rel);
      wmap_sum += weighted_average_precision(rel);
      ++included;
    }
    const double inv = included > 0 ? 1.0 / double(included) : 0.0;
    rows.push_back({"ndcg@" + std::to_string(at), bits, ndcg_sum * inv, included});
    rows.push_back({"acg@" + std::to_string(at), bits, acg_sum * inv, included});
    rows.push_back({"map", bits, map_sum * inv, included});
    rows.push_back({"weighted_map", bits, wmap_sum * inv, included});
    rows.push_back({"excluded_queries", bits, double(excluded), long(queries.size())});
  }

  // Per-category MAP over the grouped index (query categories from ground
  // truth, binary relevance = database image contains the category).
  const int categories = database.front().categories;
  const int code_bits = database.front().code_bits;
  GroupedIndex index = build_index(database, threshold);
  double cat_map_sum = 0.0;
  int cat_map_count = 0;
  for (int j = 0; j < categories; ++j) {
    long n_pos = 0;
    for (const auto& rec : database_records)
      if (std::size_t(j) < rec.scene.labels.y.size() && rec.scene.labels.y[std::size_t(j)]) ++n_pos;
    double sum = 0.0;
    long count = 0;
    for (const auto& query : queries) {
      const LabelVector& ql = label_of(q_labels, query.id);
      if (std::size_t(j) >= ql.y.size() || !ql.y[std::size_t(j)]) continue;
      auto ranking = rank_category(index, j, query.category_codes[std::size_t(j)], -1);
      RankedRelevance rel;
      rel.n_pos = n_pos;
      rel.r.reserve(ranking.size());
      for (const auto& hit : ranking) {
        const LabelVector& dl = label_of(db_labels, hit.id);
        rel.r.push_back(std::size_t(j) < dl.y.size() && dl.y[std::size_t(j)] ? 1 : 0);
      }
      if (rel.n_pos < 1) continue;
      sum += average_precision(rel);
      ++count;
    }
    const double value = count > 0 ? sum / double(count) : 0.0;
    rows.push_back({"map/cat" + std::to_string(j), code_bits, value, count});
    if (count > 0) {
      cat_map_sum += value;
      ++cat_map_count;
    }
  }
  rows.push_back({"map/cat_mean", code_bits,
                  cat_map_count > 0 ? cat_map_sum / double(cat_map_count) : 0.0,
                  long(cat_map_count)});
  return rows;
}

namespace {

void log_run(const std::string& name, std::uint64_t hash, std::uint64_t seed) {
  std::cout << "[" << name << "] config_hash=" << to_hex_u64(hash) << " seed=" << seed << "\n";
}

std::vector<SceneRecord> load_split_checked(const std::filesystem::path& dir,
                                            const std::string& split) {
  DatasetManifest manifest = read_manifest(dir);
  return read_split(dir, split, manifest.channels);
}

void check_model_against_manifest(const ModelConfig& mc, const DatasetManifest& manifest) {
  if (mc.categories != manifest.categories)
    throw ValidationError("checkpoint/config expects " + std::to_string(mc.categories) +
                          " categories, dataset has " + std::to_string(manifest.categories));
  if (mc.in_channels != manifest.channels)
    throw ValidationError("checkpoint/config expects " + std::to_string(mc.in_channels) +
                          " channels, dataset has " + std::to_string(manifest.channels));
}

int cmd_gen_data(const std::filesystem::path& config_path, const std::vector<std::string>& sets,
                 const std::filesystem::path& out_dir) {
  RunConfig cfg = load_config(config_path, sets);
  log_run("gen-data", config_hash(cfg), cfg.seed);
  GeneratedDataset data = generate_dataset(cfg);
  write_dataset(out_dir, cfg, data);
  std::cout << "wrote " << data.train.size() << "+" << data.database.size() << "+"
            << data.query.size() << " scenes to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const std::filesystem::path& config_path, const std::vector<std::string>& sets,
              const std::filesystem::path& data_dir, const std::filesystem::path& out_path,
              bool baseline) {
  RunConfig cfg = load_config(config_path, sets);
  log_run(baseline ? "train-baseline" : "train", config_hash(cfg), cfg.seed);
  DatasetManifest manifest = read_manifest(data_dir);
  ModelConfig mc = effective_model_config(cfg);
  mc.baseline = baseline;
  check_model_against_manifest(mc, manifest);
  std::vector<SceneRecord> train_split = read_split(data_dir, "train", manifest.channels);
  TrainResult result = train(train_split, mc, cfg.train);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_checkpoint(out_path, result.params, config_hash(cfg));
  write_trace(out_path.string() + ".trace.csv", result.trace);
  std::cout << "wrote checkpoint " << out_path.string() << " (" << result.trace.size()
            << " iterations)\n";
  return 0;
}

int cmd_encode(const std::filesystem::path& ckpt_path, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir, const std::vector<std::string>& splits,
               int threads) {
  Checkpoint ck = read_checkpoint(ckpt_path);
  log_run("encode", ck.config_hash, 0);
  DatasetManifest manifest = read_manifest(data_dir);
  check_model_against_manifest(ck.params.config, manifest);
  std::filesystem::create_directories(out_dir);
  for (const auto& split : splits) {
    std::vector<SceneRecord> records = read_split(data_dir, split, manifest.channels);
    std::vector<CodeBundle> codes = encode_split(ck.params, records, threads);
    write_codes(out_dir / (split + ".codes"), codes);
    std::cout << "encoded " << codes.size() << " images -> "
              << (out_dir / (split + ".codes")).string() << "\n";
  }
  return 0;
}

int cmd_index(const std::filesystem::path& codes_path, double threshold,
              const std::filesystem::path& out_path) {
  std::vector<CodeBundle> codes = read_codes(codes_path);
  GroupedIndex index = build_index(codes, threshold);
  write_index(out_path, index);
  std::size_t total = 0;
  for (int j = 0; j < index.categories; ++j) total += index.table_size(j);
  std::cout << "indexed " << codes.size() << " images, " << total << " table entries -> "
            << out_path.string() << "\n";
  return 0;
}

int cmd_query(const std::filesystem::path& codes_path, const std::filesystem::path& ckpt_path,
              const std::filesystem::path& data_dir, const std::filesystem::path& index_path,
              int top_k, const std::filesystem::path& out_path) {
  GroupedIndex index = read_index(index_path);
  std::vector<CodeBundle> queries;
  if (!codes_path.empty()) {
    queries = read_codes(codes_path);
  } else {
    Checkpoint ck = read_checkpoint(ckpt_path);
    log_run("query", ck.config_hash, 0);
    queries = encode_split(ck.params, load_split_checked(data_dir, "query"), 0);
  }
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open results file for writing: " + out_path.string());
  os << "# iahash-query topk=" << top_k << " threshold=" << format_double(index.threshold) << "\n";
  for (const auto& query : queries) {
    QueryResult result = query_category_aware(query, index, index.threshold, top_k);
    os << "query " << query.id << " retained";
    for (int j : result.retained) os << ' ' << j;
    os << '\n';
    for (int j : result.retained) {
      int rank = 1;
      for (const auto& hit : result.groups[std::size_t(j)])
        os << j << ' ' << rank++ << ' ' << hit.id << ' ' << hit.distance << '\n';
    }
  }
  if (!os) throw std::runtime_error("failed writing results: " + out_path.string());
  std::cout << "wrote grouped results for " << queries.size() << " queries -> " << out_path.string()
            << "\n";
  return 0;
}

int cmd_evaluate(const std::filesystem::path& codes_dir, const std::filesystem::path& data_dir,
                 double threshold, int eval_at, const std::filesystem::path& report_path) {
  std::vector<CodeBundle> db_codes = read_codes(codes_dir / "database.codes");
  std::vector<CodeBundle> query_codes = read_codes(codes_dir / "query.codes");
  DatasetManifest manifest = read_manifest(data_dir);
  std::vector<SceneRecord> db_records = read_split(data_dir, "database", manifest.channels);
  std::vector<SceneRecord> query_records = read_split(data_dir, "query", manifest.channels);
  std::vector<ReportRow> rows =
      evaluation_report(db_codes, query_codes, db_records, query_records, threshold, eval_at);
  std::vector<std::string> header{
      "iahash evaluation",
      "threshold=" + format_double(threshold) + " eval_at=" + std::to_string(eval_at),
      "database=" + std::to_string(db_codes.size()) + " queries=" + std::to_string(query_codes.size()),
      "dataset_config_hash=" + to_hex_u64(manifest.config_hash)};
  write_report(report_path, rows, header);
  log_run("evaluate", manifest.config_hash, manifest.seed);
  std::cout << "wrote " << rows.size() << " metric rows -> " << report_path.string() << "\n";
  return 0;
}

int cmd_saliency(const std::filesystem::path& ckpt_path, const std::filesystem::path& data_dir,
                 std::int64_t image_id, int category, const std::filesystem::path& out_path) {
  Checkpoint ck = read_checkpoint(ckpt_path);
  if (ck.params.config.baseline)
    throw ValidationError("saliency: the baseline model has no proposal probabilities");
  log_run("saliency", ck.config_hash, 0);
  DatasetManifest manifest = read_manifest(data_dir);
  check_model_against_manifest(ck.params.config, manifest);
  if (category < 0 || category >= ck.params.config.categories)
    throw ValidationError("saliency: category " + std::to_string(category) + " out of range 0.." +
                          std::to_string(ck.params.config.categories - 1));
  for (const std::string split : {"train", "database", "query"}) {
    auto file = split_path(data_dir, split);
    if (!std::filesystem::exists(file)) continue;
    for (const auto& rec : read_split(data_dir, split, manifest.channels)) {
      if (rec.scene.id != image_id) continue;
      ImageForward fwd = forward_image(rec.scene, rec.proposals, ck.params);
      std::vector<double> map = saliency_map(rec.scene, rec.proposals, fwd.prop_prob, category);
      if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
      write_pgm(out_path, map, rec.scene.width, rec.scene.height);
      std::cout << "wrote saliency map for image " << image_id << ", category " << category
                << " -> " << out_path.string() << "\n";
      return 0;
    }
  }
  throw std::runtime_error("saliency: image id " + std::to_string(image_id) +
                           " not found in any split under " + data_dir.string());
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"instance-aware multi-label hashing and retrieval"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path, codes_path, index_path, report_path;
  std::vector<std::string> sets;
  std::vector<std::string> splits{"database", "query"};
  double threshold = 0.2;
  int top_k = 10;
  int eval_at = 100;
  int threads = 0;
  std::int64_t image_id = 0;
  int category = 0;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "run configuration file")->required();
  gen->add_option("--set", sets, "override a config key (key=value)");
  gen->add_option("--out", out_path, "output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "train the instance-aware model");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--set", sets);
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--out", out_path, "checkpoint path")->required();

  auto* trb = app.add_subcommand("train-baseline", "train the flat baseline");
  trb->add_option("--config", config_path)->required();
  trb->add_option("--set", sets);
  trb->add_option("--data", data_dir)->required();
  trb->add_option("--out", out_path)->required();

  auto* enc = app.add_subcommand("encode", "encode splits to hash codes");
  enc->add_option("--ckpt", ckpt_path)->required();
  enc->add_option("--data", data_dir)->required();
  enc->add_option("--out-codes", out_path, "output codes directory")->required();
  enc->add_option("--splits", splits, "splits to encode");
  enc->add_option("--threads", threads);

  auto* idx = app.add_subcommand("index", "build the grouped hash index");
  idx->add_option("--codes", codes_path, "database codes file")->required();
  idx->add_option("--threshold", threshold, "probability threshold");
  idx->add_option("--out", out_path)->required();

  auto* qry = app.add_subcommand("query", "grouped Hamming-ranked retrieval");
  qry->add_option("--codes", codes_path, "query codes file");
  qry->add_option("--ckpt", ckpt_path, "checkpoint (encode queries on the fly)");
  qry->add_option("--data", data_dir, "dataset directory (with --ckpt)");
  qry->add_option("--index", index_path)->required();
  qry->add_option("--topk", top_k);
  qry->add_option("--out", out_path)->required();

  auto* ev = app.add_subcommand("evaluate", "metric report from codes + ground truth");
  ev->add_option("--codes", codes_path, "codes directory")->required();
  ev->add_option("--data", data_dir)->required();
  ev->add_option("--threshold", threshold);
  ev->add_option("--at", eval_at, "NDCG/ACG position");
  ev->add_option("--report", report_path)->required();

  auto* sal = app.add_subcommand("saliency", "emit a per-category saliency map");
  sal->add_option("--ckpt", ckpt_path)->required();
  sal->add_option("--data", data_dir)->required();
  sal->add_option("--image-id", image_id)->required();
  sal->add_option("--category", category)->required();
  sal->add_option("--out", out_path, "output PGM path")->required();

  std::vector<const char*> argv;
  argv.push_back("iahash");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, sets, out_path);
    if (tr->parsed()) return cmd_train(config_path, sets, data_dir, out_path, false);
    if (trb->parsed()) return cmd_train(config_path, sets, data_dir, out_path, true);
    if (enc->parsed()) return cmd_encode(ckpt_path, data_dir, out_path, splits, threads);
    if (idx->parsed()) return cmd_index(codes_path, threshold, out_path);
    if (qry->parsed()) {
      if (codes_path.empty() && ckpt_path.empty())
        throw ValidationError("query: give either --codes or --ckpt with --data");
      return cmd_query(codes_path, ckpt_path, data_dir, index_path, top_k, out_path);
    }
    if (ev->parsed()) return cmd_evaluate(codes_path, data_dir, threshold, eval_at, report_path);
    if (sal->parsed()) return cmd_saliency(ckpt_path, data_dir, image_id, category, out_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace iahash
