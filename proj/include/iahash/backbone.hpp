#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "iahash/matrix.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // [channel][y][x]

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w),
                                    values(std::size_t(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) { return values[(std::size_t(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return values[(std::size_t(c) * height + y) * width + x]; }
  std::size_t flat(int c, int y, int x) const { return (std::size_t(c) * height + y) * width + x; }
  bool all_finite() const;
};

FeatureMap scene_to_input(const Scene& scene);

// Pooling grid sizes per pyramid level plus the feature-map channel count.
// The pooled vector has dim() = channels * sum(level^2) entries.
struct PyramidConfig {
  std::vector<int> levels{4, 3, 2, 1};
  int channels = 32;

  int dim() const {
    int cells = 0;
    for (int g : levels) cells += g * g;
    return channels * cells;
  }
};

void validate(const PyramidConfig& cfg);

// 3x3 convolution, stride 1, zero padding 1.
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;  // [out][in][ky][kx]
  std::vector<double> bias;     // [out]

  ConvLayer() = default;
  ConvLayer(int in_c, int out_c)
      : in_channels(in_c), out_channels(out_c),
        weights(std::size_t(out_c) * in_c * 9, 0.0), bias(std::size_t(out_c), 0.0) {}

  double w(int o, int i, int ky, int kx) const {
    return weights[((std::size_t(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
  double& w(int o, int i, int ky, int kx) {
    return weights[((std::size_t(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
};

// conv1 -> ReLU -> conv2 -> ReLU -> 2x2 max-pool (stride 2).
struct ConvStackParams {
  ConvLayer conv1;
  ConvLayer conv2;
};

struct ConvStackCache {
  FeatureMap input;
  FeatureMap act1;                     // ReLU(conv1)
  FeatureMap act2;                     // ReLU(conv2), pre-pool
  std::vector<std::uint32_t> pool_src; // flat act2 index feeding each pooled cell
};

FeatureMap conv_stack_forward(const FeatureMap& image, const ConvStackParams& params,
                              ConvStackCache* cache = nullptr);

// Accumulates parameter gradients into `grads` (shapes must match `params`);
// optionally returns the gradient w.r.t. the input image.
void conv_stack_backward(const FeatureMap& d_out, const ConvStackParams& params,
                         const ConvStackCache& cache, ConvStackParams& grads,
                         FeatureMap* d_input = nullptr);

// Number of conv_stack_forward invocations since process start (test hook).
std::uint64_t conv_stack_evals();

// Max-pools the feature-map cells under a normalized box over every pyramid
// level. Bin edges use the floor/ceil split, so each bin is nonempty for any
// valid box. Output is ordered level-major, bins row-major, channels fastest.
// `src_cells` (if given) records the flat argmax cell per output entry.
std::vector<double> spp_pool(const FeatureMap& fm, const std::array<double, 4>& box,
                             const PyramidConfig& cfg,
                             std::vector<std::uint32_t>* src_cells = nullptr);

// Scatter-add of d_out into the recorded argmax cells.
void spp_pool_backward(const std::vector<double>& d_out,
                       const std::vector<std::uint32_t>& src_cells, FeatureMap& d_fm);

// Row i = spp_pool(conv_stack(scene), proposals[i]); the conv stack runs once.
Matrix encode_proposals(const Scene& scene, const std::vector<Proposal>& proposals,
                        const ConvStackParams& params, const PyramidConfig& cfg);

}  // namespace iahash
