#include "iahash/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iahash/layers.hpp"
#include "iahash/util.hpp"

namespace iahash {

void validate(const ModelConfig& cfg) {
  if (cfg.categories < 2) throw ValidationError("model config: categories must be >= 2");
  if (cfg.in_channels < 1) throw ValidationError("model config: in_channels must be >= 1");
  if (cfg.code_bits < 1) throw ValidationError("model config: code_bits must be >= 1");
  if (cfg.semantic_bits < 0) throw ValidationError("model config: semantic_bits must be >= 0");
  try {
    validate(cfg.pyramid);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

namespace {
void fill_uniform(std::vector<double>& w, double r, SeededRng& rng) {
  for (double& v : w) v = rng.uniform(-r, r);
}

double glorot_radius(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}

Matrix glorot_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  fill_uniform(m.values, glorot_radius(rows, cols), rng);
  return m;
}
}  // namespace

ModelParams init_params(const ModelConfig& cfg, SeededRng& rng) {
  validate(cfg);
  ModelParams p;
  p.config = cfg;
  const int fm_channels = cfg.pyramid.channels;
  p.conv.conv1 = ConvLayer(cfg.in_channels, fm_channels);
  fill_uniform(p.conv.conv1.weights,
               glorot_radius(std::size_t(cfg.in_channels) * 9, std::size_t(fm_channels) * 9), rng);
  p.conv.conv2 = ConvLayer(fm_channels, fm_channels);
  fill_uniform(p.conv.conv2.weights,
               glorot_radius(std::size_t(fm_channels) * 9, std::size_t(fm_channels) * 9), rng);

  const std::size_t d = std::size_t(cfg.feature_dim());
  const std::size_t c = std::size_t(cfg.categories);
  const std::size_t b = std::size_t(cfg.code_bits);
  if (cfg.baseline) {
    p.w_flat = glorot_matrix(std::size_t(fm_channels), c * b, rng);
    p.b_flat.assign(c * b, 0.0);
  } else {
    p.w_label = glorot_matrix(d, c, rng);
    p.b_label.assign(c, 0.0);
    p.w_hash = glorot_matrix(d, b, rng);
    p.b_hash.assign(b, 0.0);
    if (cfg.semantic_bits > 0) {
      p.w_sem = glorot_matrix(c * b, std::size_t(cfg.semantic_bits), rng);
      p.b_sem.assign(std::size_t(cfg.semantic_bits), 0.0);
    }
  }
  return p;
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams g;
  g.config = params.config;
  g.conv.conv1 = ConvLayer(params.conv.conv1.in_channels, params.conv.conv1.out_channels);
  g.conv.conv2 = ConvLayer(params.conv.conv2.in_channels, params.conv.conv2.out_channels);
  g.w_label = Matrix(params.w_label.rows, params.w_label.cols);
  g.b_label.assign(params.b_label.size(), 0.0);
  g.w_hash = Matrix(params.w_hash.rows, params.w_hash.cols);
  g.b_hash.assign(params.b_hash.size(), 0.0);
  g.w_sem = Matrix(params.w_sem.rows, params.w_sem.cols);
  g.b_sem.assign(params.b_sem.size(), 0.0);
  g.w_flat = Matrix(params.w_flat.rows, params.w_flat.cols);
  g.b_flat.assign(params.b_flat.size(), 0.0);
  return g;
}

namespace {
void axpy(std::vector<double>& acc, const std::vector<double>& x, double a) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a * x[i];
}
}  // namespace

void apply_update(ModelParams& params, const ModelParams& grads, double lr) {
  axpy(params.conv.conv1.weights, grads.conv.conv1.weights, -lr);
  axpy(params.conv.conv1.bias, grads.conv.conv1.bias, -lr);
  axpy(params.conv.conv2.weights, grads.conv.conv2.weights, -lr);
  axpy(params.conv.conv2.bias, grads.conv.conv2.bias, -lr);
  axpy(params.w_label.values, grads.w_label.values, -lr);
  axpy(params.b_label, grads.b_label, -lr);
  axpy(params.w_hash.values, grads.w_hash.values, -lr);
  axpy(params.b_hash, grads.b_hash, -lr);
  axpy(params.w_sem.values, grads.w_sem.values, -lr);
  axpy(params.b_sem, grads.b_sem, -lr);
  axpy(params.w_flat.values, grads.w_flat.values, -lr);
  axpy(params.b_flat, grads.b_flat, -lr);
}

ImageForward forward_image(const Scene& scene, const std::vector<Proposal>& proposals,
                           const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  ImageForward fwd;
  fwd.fm = conv_stack_forward(scene_to_input(scene), params.conv, &fwd.conv_cache);

  if (cfg.baseline) {
    // Global average pool, then one affine layer split into c groups.
    const std::size_t area = std::size_t(fwd.fm.height) * fwd.fm.width;
    fwd.gap.assign(std::size_t(fwd.fm.channels), 0.0);
    for (int ch = 0; ch < fwd.fm.channels; ++ch) {
      double acc = 0.0;
      const double* base = fwd.fm.values.data() + std::size_t(ch) * area;
      for (std::size_t i = 0; i < area; ++i) acc += base[i];
      fwd.gap[std::size_t(ch)] = acc / double(area);
    }
    fwd.fused = semantic_project(fwd.gap, params.w_flat, params.b_flat);
    return fwd;
  }

  if (proposals.empty()) throw std::invalid_argument("forward_image: no proposals");
  const std::size_t n = proposals.size();
  const std::size_t d = std::size_t(cfg.feature_dim());
  fwd.features = Matrix(n, d);
  fwd.spp_src.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row = spp_pool(fwd.fm, proposals[i].coords, cfg.pyramid, &fwd.spp_src[i]);
    std::copy(row.begin(), row.end(), fwd.features.row(i));
  }
  fwd.logits = affine_forward(fwd.features, params.w_label, params.b_label);
  fwd.pooled = cross_hypothesis_maxpool(fwd.logits);
  fwd.prob = image_probability(fwd.pooled);
  fwd.prop_prob = proposal_probabilities(fwd.logits);
  fwd.hash_feat = affine_forward(fwd.features, params.w_hash, params.b_hash);
  fwd.fused = cross_proposal_fusion(fwd.prop_prob, fwd.hash_feat);
  if (cfg.semantic_bits > 0) fwd.semantic = semantic_project(fwd.fused, params.w_sem, params.b_sem);
  return fwd;
}

void backward_image(const ImageForward& fwd, const ModelParams& params,
                    std::span<const double> d_pooled, std::span<const double> d_fused,
                    std::span<const double> d_semantic, ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const std::size_t c = std::size_t(cfg.categories);
  const std::size_t b = std::size_t(cfg.code_bits);

  std::vector<double> df(c * b, 0.0);
  if (!d_fused.empty()) {
    if (d_fused.size() != df.size()) throw std::invalid_argument("backward_image: d_fused length");
    std::copy(d_fused.begin(), d_fused.end(), df.begin());
  }

  if (cfg.baseline) {
    // d gap via the flat head, then spread evenly over the feature map.
    std::vector<double> d_gap(fwd.gap.size(), 0.0);
    for (std::size_t r = 0; r < params.w_flat.rows; ++r) {
      const double* wrow = params.w_flat.row(r);
      double acc = 0.0;
      for (std::size_t k = 0; k < params.w_flat.cols; ++k) {
        acc += wrow[k] * df[k];
        grads.w_flat(r, k) += fwd.gap[r] * df[k];
      }
      d_gap[r] = acc;
    }
    for (std::size_t k = 0; k < df.size(); ++k) grads.b_flat[k] += df[k];

    FeatureMap d_fm(fwd.fm.channels, fwd.fm.height, fwd.fm.width);
    const std::size_t area = std::size_t(fwd.fm.height) * fwd.fm.width;
    for (int ch = 0; ch < fwd.fm.channels; ++ch) {
      const double share = d_gap[std::size_t(ch)] / double(area);
      double* base = d_fm.values.data() + std::size_t(ch) * area;
      for (std::size_t i = 0; i < area; ++i) base[i] = share;
    }
    conv_stack_backward(d_fm, params.conv, fwd.conv_cache, grads.conv);
    return;
  }

  // Semantic head.
  if (!d_semantic.empty()) {
    if (d_semantic.size() != std::size_t(cfg.semantic_bits))
      throw std::invalid_argument("backward_image: d_semantic length");
    for (std::size_t r = 0; r < params.w_sem.rows; ++r) {
      const double* wrow = params.w_sem.row(r);
      double acc = 0.0;
      for (std::size_t q = 0; q < params.w_sem.cols; ++q) {
        acc += wrow[q] * d_semantic[q];
        grads.w_sem(r, q) += fwd.fused[r] * d_semantic[q];
      }
      df[r] += acc;
    }
    for (std::size_t q = 0; q < d_semantic.size(); ++q) grads.b_sem[q] += d_semantic[q];
  }

  // Fusion back to P and H.
  FusionGrads fg = cross_proposal_fusion_backward(fwd.prop_prob, fwd.hash_feat, df);

  // Proposal probabilities back to logits.
  Matrix d_logits = row_softmax_backward(fwd.prop_prob, fg.d_prob);

  // Classification gradient routes through the per-category max rows.
  if (!d_pooled.empty()) {
    if (d_pooled.size() != c) throw std::invalid_argument("backward_image: d_pooled length");
    for (std::size_t j = 0; j < c; ++j)
      d_logits(fwd.pooled.argmax_rows[j], j) += d_pooled[j];
  }

  // Heads back to the shared proposal features.
  AffineGrads label_g = affine_backward(fwd.features, params.w_label, d_logits);
  AffineGrads hash_g = affine_backward(fwd.features, params.w_hash, fg.d_feat);
  for (std::size_t i = 0; i < label_g.d_w.values.size(); ++i)
    grads.w_label.values[i] += label_g.d_w.values[i];
  for (std::size_t i = 0; i < label_g.d_bias.size(); ++i) grads.b_label[i] += label_g.d_bias[i];
  for (std::size_t i = 0; i < hash_g.d_w.values.size(); ++i)
    grads.w_hash.values[i] += hash_g.d_w.values[i];
  for (std::size_t i = 0; i < hash_g.d_bias.size(); ++i) grads.b_hash[i] += hash_g.d_bias[i];

  Matrix d_features = label_g.d_x;
  for (std::size_t i = 0; i < d_features.values.size(); ++i)
    d_features.values[i] += hash_g.d_x.values[i];

  // Features back through SPP to the shared map, then the conv stack.
  FeatureMap d_fm(fwd.fm.channels, fwd.fm.height, fwd.fm.width);
  for (std::size_t i = 0; i < fwd.spp_src.size(); ++i) {
    std::vector<double> drow(d_features.row(i), d_features.row(i) + d_features.cols);
    spp_pool_backward(drow, fwd.spp_src[i], d_fm);
  }
  conv_stack_backward(d_fm, params.conv, fwd.conv_cache, grads.conv);
}

CodeBundle encode_image(const Scene& scene, const std::vector<Proposal>& proposals,
                        const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  ImageForward fwd = forward_image(scene, proposals, params);
  CodeBundle bundle;
  bundle.id = scene.id;
  bundle.categories = cfg.categories;
  bundle.code_bits = cfg.code_bits;
  bundle.semantic_bits = cfg.baseline ? 0 : cfg.semantic_bits;
  const std::size_t b = std::size_t(cfg.code_bits);
  for (int j = 0; j < cfg.categories; ++j)
    bundle.category_codes.push_back(
        binarize(std::span<const double>(fwd.fused.data() + std::size_t(j) * b, b)));
  if (cfg.baseline) {
    bundle.probabilities.assign(std::size_t(cfg.categories), 1.0 / cfg.categories);
  } else {
    bundle.probabilities = fwd.prob;
    if (cfg.semantic_bits > 0) bundle.semantic_code = binarize(fwd.semantic);
  }
  return bundle;
}

}  // namespace iahash
