#pragma once

#include <vector>

#include "iahash/backbone.hpp"
#include "iahash/hashcode.hpp"
#include "iahash/labelprob.hpp"
#include "iahash/matrix.hpp"
#include "iahash/rng.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

struct ModelConfig {
  int categories = 4;
  int in_channels = 1;
  PyramidConfig pyramid{{2, 1}, 8};
  int code_bits = 12;      // per-category code length b
  int semantic_bits = 48;  // semantic code length q; 0 disables the head
  bool baseline = false;   // global-average-pool variant without the
                           // proposal and label-probability paths

  int feature_dim() const { return pyramid.dim(); }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& cfg);

struct ModelParams {
  ModelConfig config;
  ConvStackParams conv;
  Matrix w_label;               // d x c
  std::vector<double> b_label;
  Matrix w_hash;                // d x b
  std::vector<double> b_hash;
  Matrix w_sem;                 // (c*b) x q
  std::vector<double> b_sem;
  Matrix w_flat;                // channels x (c*b), baseline head
  std::vector<double> b_flat;
};

// Uniform [-r, r] weights with r = sqrt(6 / (fan_in + fan_out)); zero biases.
ModelParams init_params(const ModelConfig& cfg, SeededRng& rng);

// Shape-compatible zero gradients for `params`.
ModelParams zero_like(const ModelParams& params);

// The update step theta -= lr * grad.
void apply_update(ModelParams& params, const ModelParams& grads, double lr);

// Forward state for one image, kept for the backward pass.
struct ImageForward {
  ConvStackCache conv_cache;
  FeatureMap fm;
  std::vector<std::vector<std::uint32_t>> spp_src;  // per proposal
  Matrix features;     // N x d
  Matrix logits;       // N x c
  PooledScores pooled;
  std::vector<double> prob;   // image-level probabilities
  Matrix prop_prob;    // N x c
  Matrix hash_feat;    // N x b
  std::vector<double> fused;     // c*b, group-major
  std::vector<double> semantic;  // q (empty when disabled)
  std::vector<double> gap;       // baseline: per-channel feature-map means
};

ImageForward forward_image(const Scene& scene, const std::vector<Proposal>& proposals,
                           const ModelParams& params);

// Accumulates parameter gradients for one image given the upstream gradients
// d_pooled (from the classification loss), d_fused and d_semantic (from the
// triplet losses). Empty spans mean zero.
void backward_image(const ImageForward& fwd, const ModelParams& params,
                    std::span<const double> d_pooled, std::span<const double> d_fused,
                    std::span<const double> d_semantic, ModelParams& grads);

// Full forward pass to a code bundle: per-category sign codes, image
// probabilities and (when enabled) the semantic code.
CodeBundle encode_image(const Scene& scene, const std::vector<Proposal>& proposals,
                        const ModelParams& params);

}  // namespace iahash
