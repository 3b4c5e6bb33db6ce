#include "iahash/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

namespace {
constexpr std::uint64_t kStreamInit = 0x1A11;
constexpr std::uint64_t kStreamBatch = 0x1A12;
constexpr std::uint64_t kStreamCatTriplets = 0x1A13;
constexpr std::uint64_t kStreamSemTriplets = 0x1A14;
}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.base_lr > 0.0)) throw ValidationError("train config: base_lr must be > 0");
  if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (cfg.iterations < 0) throw ValidationError("train config: iterations must be >= 0");
  if (cfg.lr_drop_epochs < 1) throw ValidationError("train config: lr_drop_epochs must be >= 1");
  if (cfg.w_cls < 0.0 || cfg.w_cat < 0.0 || cfg.w_sem < 0.0)
    throw ValidationError("train config: loss weights must be >= 0");
  if (cfg.triplet_cap < 1) throw ValidationError("train config: triplet_cap must be >= 1");
  if (cfg.cat_triplets < 0) throw ValidationError("train config: cat_triplets must be >= 0");
  if (!(cfg.margin > 0.0)) throw ValidationError("train config: margin must be > 0");
  if (cfg.threads < 0) throw ValidationError("train config: threads must be >= 0");
}

std::vector<std::array<int, 3>> generate_triplets(const std::vector<LabelVector>& labels, int cap,
                                                  SeededRng& rng) {
  const int n = int(labels.size());
  Matrix shared(std::size_t(n), std::size_t(n));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      double s = shared_labels(labels[std::size_t(a)], labels[std::size_t(b)]);
      shared(std::size_t(a), std::size_t(b)) = s;
      shared(std::size_t(b), std::size_t(a)) = s;
    }
  std::vector<std::array<int, 3>> out;
  for (int a = 0; a < n; ++a)
    for (int p = 0; p < n; ++p) {
      if (p == a) continue;
      for (int q = 0; q < n; ++q) {
        if (q == a || q == p) continue;
        if (shared(std::size_t(a), std::size_t(p)) > shared(std::size_t(a), std::size_t(q)))
          out.push_back({a, p, q});
      }
    }
  if (cap > 0 && int(out.size()) > cap) {
    std::vector<std::size_t> idx(out.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int i = 0; i < cap; ++i)
      std::swap(idx[std::size_t(i)],
                idx[std::size_t(i) + std::size_t(rng.below(idx.size() - std::size_t(i)))]);
    idx.resize(std::size_t(cap));
    std::sort(idx.begin(), idx.end());
    std::vector<std::array<int, 3>> kept;
    kept.reserve(idx.size());
    for (auto i : idx) kept.push_back(out[i]);
    out = std::move(kept);
  }
  return out;
}

std::vector<std::array<int, 3>> sample_category_triplets(const std::vector<LabelVector>& labels,
                                                         int category, int count, SeededRng& rng) {
  std::vector<int> members, others;
  for (int i = 0; i < int(labels.size()); ++i) {
    const auto& y = labels[std::size_t(i)].y;
    if (category < 0 || std::size_t(category) >= y.size())
      throw std::invalid_argument("sample_category_triplets: category out of range");
    (y[std::size_t(category)] ? members : others).push_back(i);
  }
  std::vector<std::array<int, 3>> out;
  if (members.size() < 2 || others.empty()) return out;
  for (int t = 0; t < count; ++t) {
    int anchor = members[std::size_t(rng.below(members.size()))];
    int pos = anchor;
    while (pos == anchor) pos = members[std::size_t(rng.below(members.size()))];
    int neg = others[std::size_t(rng.below(others.size()))];
    out.push_back({anchor, pos, neg});
  }
  return out;
}

double learning_rate_at(const TrainConfig& cfg, std::size_t train_size, std::int64_t iteration) {
  std::int64_t epoch = train_size > 0 ? iteration * cfg.batch_size / std::int64_t(train_size) : 0;
  std::int64_t drops = epoch / cfg.lr_drop_epochs;
  return cfg.base_lr * std::pow(10.0, -double(drops));
}

std::vector<int> draw_batch(std::size_t data_size, int batch_size, std::uint64_t seed,
                            std::int64_t iteration) {
  SeededRng rng = SeededRng::derived(seed, kStreamBatch, std::uint64_t(iteration));
  const int take = std::min<int>(batch_size, int(data_size));
  std::vector<int> idx(data_size);
  for (std::size_t i = 0; i < data_size; ++i) idx[i] = int(i);
  for (int i = 0; i < take; ++i)
    std::swap(idx[std::size_t(i)],
              idx[std::size_t(i) + std::size_t(rng.below(data_size - std::size_t(i)))]);
  idx.resize(std::size_t(take));
  return idx;
}

BatchEval evaluate_batch(const ModelParams& params, const std::vector<SceneRecord>& data,
                         std::span<const int> batch, const TrainConfig& cfg,
                         std::int64_t iteration) {
  const ModelConfig& mc = params.config;
  const std::size_t m = batch.size();
  const std::size_t fused_len = std::size_t(mc.categories) * mc.code_bits;

  std::vector<ImageForward> fwd(m);
  parallel_for(m, cfg.threads, [&](std::size_t s) {
    const SceneRecord& rec = data[std::size_t(batch[s])];
    fwd[s] = forward_image(rec.scene, rec.proposals, params);
  });

  std::vector<LabelVector> labels(m);
  for (std::size_t s = 0; s < m; ++s) labels[s] = data[std::size_t(batch[s])].scene.labels;

  std::vector<std::vector<double>> d_pooled(m), d_fused(m), d_sem(m);
  for (std::size_t s = 0; s < m; ++s) d_fused[s].assign(fused_len, 0.0);

  BatchEval eval;
  eval.losses.iteration = iteration;

  // Classification loss, averaged over labelled images.
  if (!mc.baseline && cfg.w_cls > 0.0) {
    std::vector<std::size_t> labelled;
    for (std::size_t s = 0; s < m; ++s)
      if (labels[s].count() >= 1) labelled.push_back(s);
    if (!labelled.empty()) {
      const double scale = cfg.w_cls / double(labelled.size());
      double sum = 0.0;
      for (std::size_t s : labelled) {
        ClassificationResult r = classification_loss(fwd[s].prob, labels[s]);
        sum += r.loss;
        d_pooled[s].assign(r.grad_m.size(), 0.0);
        for (std::size_t j = 0; j < r.grad_m.size(); ++j) d_pooled[s][j] = scale * r.grad_m[j];
      }
      eval.losses.loss_cls = cfg.w_cls * sum / double(labelled.size());
    }
  }

  // Per-category triplet loss on the fused groups.
  if (cfg.w_cat > 0.0 && cfg.cat_triplets > 0) {
    SeededRng rng = SeededRng::derived(cfg.seed, kStreamCatTriplets, std::uint64_t(iteration));
    std::vector<std::pair<int, std::array<int, 3>>> triples;
    for (int j = 0; j < mc.categories; ++j)
      for (const auto& t : sample_category_triplets(labels, j, cfg.cat_triplets, rng))
        triples.emplace_back(j, t);
    if (!triples.empty()) {
      const double scale = cfg.w_cat / double(triples.size());
      double sum = 0.0;
      for (const auto& [j, t] : triples) {
        TripletResult r = category_triplet_loss(fwd[std::size_t(t[0])].fused,
                                                fwd[std::size_t(t[1])].fused,
                                                fwd[std::size_t(t[2])].fused, j, mc.code_bits,
                                                cfg.margin);
        sum += r.loss;
        for (std::size_t k = 0; k < fused_len; ++k) {
          d_fused[std::size_t(t[0])][k] += scale * r.grad_anchor[k];
          d_fused[std::size_t(t[1])][k] += scale * r.grad_pos[k];
          d_fused[std::size_t(t[2])][k] += scale * r.grad_neg[k];
        }
      }
      eval.losses.loss_cat = cfg.w_cat * sum / double(triples.size());
    }
  }

  // Weighted triplet loss on the semantic projection.
  if (!mc.baseline && mc.semantic_bits > 0 && cfg.w_sem > 0.0) {
    SeededRng rng = SeededRng::derived(cfg.seed, kStreamSemTriplets, std::uint64_t(iteration));
    std::vector<std::array<int, 3>> triples = generate_triplets(labels, cfg.triplet_cap, rng);
    if (!triples.empty()) {
      for (std::size_t s = 0; s < m; ++s) d_sem[s].assign(std::size_t(mc.semantic_bits), 0.0);
      const double scale = cfg.w_sem / double(triples.size());
      double sum = 0.0;
      for (const auto& t : triples) {
        int sim_pos = shared_labels(labels[std::size_t(t[0])], labels[std::size_t(t[1])]);
        int sim_neg = shared_labels(labels[std::size_t(t[0])], labels[std::size_t(t[2])]);
        TripletResult r = weighted_triplet_loss(fwd[std::size_t(t[0])].semantic,
                                                fwd[std::size_t(t[1])].semantic,
                                                fwd[std::size_t(t[2])].semantic, sim_pos, sim_neg,
                                                cfg.margin);
        sum += r.loss;
        for (std::size_t k = 0; k < std::size_t(mc.semantic_bits); ++k) {
          d_sem[std::size_t(t[0])][k] += scale * r.grad_anchor[k];
          d_sem[std::size_t(t[1])][k] += scale * r.grad_pos[k];
          d_sem[std::size_t(t[2])][k] += scale * r.grad_neg[k];
        }
      }
      eval.losses.loss_sem = cfg.w_sem * sum / double(triples.size());
    }
  }

  eval.losses.total = eval.losses.loss_cls + eval.losses.loss_cat + eval.losses.loss_sem;

  // Per-image backward, reduced in batch order so the result is independent
  // of thread scheduling.
  std::vector<ModelParams> partial(m);
  parallel_for(m, cfg.threads, [&](std::size_t s) {
    partial[s] = zero_like(params);
    backward_image(fwd[s], params, d_pooled[s], d_fused[s], d_sem[s], partial[s]);
  });
  eval.grads = zero_like(params);
  for (std::size_t s = 0; s < m; ++s) apply_update(eval.grads, partial[s], -1.0);
  return eval;
}

TrainResult train(const std::vector<SceneRecord>& data, const ModelConfig& model_cfg,
                  const TrainConfig& cfg) {
  validate(model_cfg);
  validate(cfg);
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");

  SeededRng init_rng = SeededRng::derived(cfg.seed, kStreamInit);
  TrainResult result;
  result.params = init_params(model_cfg, init_rng);
  result.trace.reserve(std::size_t(cfg.iterations));

  for (std::int64_t iter = 0; iter < cfg.iterations; ++iter) {
    const double lr = learning_rate_at(cfg, data.size(), iter);
    std::vector<int> batch = draw_batch(data.size(), cfg.batch_size, cfg.seed, iter);
    BatchEval eval = evaluate_batch(result.params, data, batch, cfg, iter);
    if (!std::isfinite(eval.losses.total))
      throw std::runtime_error(
          "train: non-finite loss at iteration " + std::to_string(iter) +
          " (cls=" + format_double(eval.losses.loss_cls) +
          ", cat=" + format_double(eval.losses.loss_cat) +
          ", sem=" + format_double(eval.losses.loss_sem) + ")");
    apply_update(result.params, eval.grads, lr);
    TraceRow row = eval.losses;
    row.lr = lr;
    result.trace.push_back(row);
  }
  return result;
}

namespace {
constexpr char kMagic[8] = {'I', 'A', 'H', 'C', 'K', '0', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f64_block(std::string& out, const std::vector<double>& block) {
  put_u64(out, block.size());
  for (double d : block) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
  }
}

struct Reader {
  const std::string& buf;
  std::size_t at = 0;

  void need(std::size_t n, const char* what) {
    if (at + n > buf.size())
      throw ValidationError(std::string("checkpoint: truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[at + std::size_t(i)])) << (8 * i);
    at += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[at + std::size_t(i)])) << (8 * i);
    at += 8;
    return v;
  }
  std::vector<double> f64_block(std::size_t expected, const char* what) {
    std::uint64_t n = u64(what);
    if (n != expected)
      throw ValidationError(std::string("checkpoint: block '") + what + "' has " + std::to_string(n) +
                            " values, expected " + std::to_string(expected));
    need(n * 8, what);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = u64(what);
      std::memcpy(&out[i], &bits, 8);
    }
    return out;
  }
};
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      std::uint64_t config_hash) {
  const ModelConfig& mc = params.config;
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, mc.baseline ? 1u : 0u);
  put_u32(out, std::uint32_t(mc.categories));
  put_u32(out, std::uint32_t(mc.in_channels));
  put_u32(out, std::uint32_t(mc.pyramid.channels));
  put_u32(out, std::uint32_t(mc.pyramid.levels.size()));
  for (int g : mc.pyramid.levels) put_u32(out, std::uint32_t(g));
  put_u32(out, std::uint32_t(mc.code_bits));
  put_u32(out, std::uint32_t(mc.semantic_bits));
  put_u64(out, config_hash);

  put_f64_block(out, params.conv.conv1.weights);
  put_f64_block(out, params.conv.conv1.bias);
  put_f64_block(out, params.conv.conv2.weights);
  put_f64_block(out, params.conv.conv2.bias);
  if (mc.baseline) {
    put_f64_block(out, params.w_flat.values);
    put_f64_block(out, params.b_flat);
  } else {
    put_f64_block(out, params.w_label.values);
    put_f64_block(out, params.b_label);
    put_f64_block(out, params.w_hash.values);
    put_f64_block(out, params.b_hash);
    put_f64_block(out, params.w_sem.values);
    put_f64_block(out, params.b_sem);
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(out.data(), std::streamsize(out.size()));
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("checkpoint: bad magic in " + path.string());

  Reader r{buf, sizeof(kMagic)};
  ModelConfig mc;
  std::uint32_t kind = r.u32("kind");
  if (kind > 1) throw ValidationError("checkpoint: unknown model kind " + std::to_string(kind));
  mc.baseline = kind == 1;
  mc.categories = int(r.u32("categories"));
  mc.in_channels = int(r.u32("in_channels"));
  mc.pyramid.channels = int(r.u32("pyramid channels"));
  std::uint32_t n_levels = r.u32("level count");
  if (n_levels == 0 || n_levels > 16) throw ValidationError("checkpoint: bad pyramid level count");
  mc.pyramid.levels.clear();
  for (std::uint32_t i = 0; i < n_levels; ++i) mc.pyramid.levels.push_back(int(r.u32("level")));
  mc.code_bits = int(r.u32("code_bits"));
  mc.semantic_bits = int(r.u32("semantic_bits"));
  validate(mc);

  Checkpoint ck;
  ck.config_hash = r.u64("config_hash");
  ck.params.config = mc;

  const std::size_t fm_channels = std::size_t(mc.pyramid.channels);
  const std::size_t d = std::size_t(mc.feature_dim());
  const std::size_t c = std::size_t(mc.categories);
  const std::size_t b = std::size_t(mc.code_bits);

  ck.params.conv.conv1 = ConvLayer(mc.in_channels, mc.pyramid.channels);
  ck.params.conv.conv1.weights = r.f64_block(std::size_t(mc.in_channels) * fm_channels * 9, "conv1 weights");
  ck.params.conv.conv1.bias = r.f64_block(fm_channels, "conv1 bias");
  ck.params.conv.conv2 = ConvLayer(mc.pyramid.channels, mc.pyramid.channels);
  ck.params.conv.conv2.weights = r.f64_block(fm_channels * fm_channels * 9, "conv2 weights");
  ck.params.conv.conv2.bias = r.f64_block(fm_channels, "conv2 bias");
  if (mc.baseline) {
    ck.params.w_flat = Matrix(fm_channels, c * b);
    ck.params.w_flat.values = r.f64_block(fm_channels * c * b, "flat weights");
    ck.params.b_flat = r.f64_block(c * b, "flat bias");
  } else {
    ck.params.w_label = Matrix(d, c);
    ck.params.w_label.values = r.f64_block(d * c, "label weights");
    ck.params.b_label = r.f64_block(c, "label bias");
    ck.params.w_hash = Matrix(d, b);
    ck.params.w_hash.values = r.f64_block(d * b, "hash weights");
    ck.params.b_hash = r.f64_block(b, "hash bias");
    ck.params.w_sem = Matrix(c * b, std::size_t(mc.semantic_bits));
    ck.params.w_sem.values = r.f64_block(c * b * std::size_t(mc.semantic_bits), "semantic weights");
    ck.params.b_sem = r.f64_block(std::size_t(mc.semantic_bits), "semantic bias");
  }
  if (r.at != buf.size()) throw ValidationError("checkpoint: trailing bytes in " + path.string());
  return ck;
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open trace for writing: " + path.string());
  os << "iter,lr,loss_cls,loss_cat,loss_sem,total\n";
  for (const auto& row : trace)
    os << row.iteration << ',' << format_double(row.lr) << ',' << format_double(row.loss_cls) << ','
       << format_double(row.loss_cat) << ',' << format_double(row.loss_sem) << ','
       << format_double(row.total) << '\n';
  if (!os) throw std::runtime_error("failed writing trace: " + path.string());
}

}  // namespace iahash
