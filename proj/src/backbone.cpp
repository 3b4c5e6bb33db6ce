#include "iahash/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace iahash {

namespace {
std::atomic<std::uint64_t> g_conv_evals{0};

void conv3x3_forward(const FeatureMap& in, const ConvLayer& layer, FeatureMap& out) {
  if (in.channels != layer.in_channels)
    throw std::invalid_argument("conv: input has " + std::to_string(in.channels) +
                                " channels, layer expects " + std::to_string(layer.in_channels));
  const int h = in.height, w = in.width;
  out = FeatureMap(layer.out_channels, h, w);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int y = 0; y < h; ++y) {
      double* orow = &out.at(o, y, 0);
      for (int x = 0; x < w; ++x) orow[x] = layer.bias[std::size_t(o)];
    }
    for (int i = 0; i < layer.in_channels; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = layer.w(o, i, ky, kx);
          if (wv == 0.0) continue;
          const int dy = ky - 1, dx = kx - 1;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y) {
            const double* irow = &in.at(i, y + dy, 0);
            double* orow = &out.at(o, y, 0);
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + dx];
          }
        }
      }
    }
  }
}

// dW/db for one layer plus (optionally) the gradient w.r.t. its input.
void conv3x3_backward(const FeatureMap& in, const ConvLayer& layer, const FeatureMap& d_out,
                      ConvLayer& grads, FeatureMap* d_in) {
  const int h = in.height, w = in.width;
  for (int o = 0; o < layer.out_channels; ++o) {
    double db = 0.0;
    for (int y = 0; y < h; ++y) {
      const double* drow = &d_out.at(o, y, 0);
      for (int x = 0; x < w; ++x) db += drow[x];
    }
    grads.bias[std::size_t(o)] += db;
    for (int i = 0; i < layer.in_channels; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int dy = ky - 1, dx = kx - 1;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* irow = &in.at(i, y + dy, 0);
            const double* drow = &d_out.at(o, y, 0);
            for (int x = x0; x < x1; ++x) acc += irow[x + dx] * drow[x];
          }
          grads.w(o, i, ky, kx) += acc;
          if (d_in) {
            const double wv = layer.w(o, i, ky, kx);
            if (wv != 0.0) {
              for (int y = y0; y < y1; ++y) {
                double* irow = &d_in->at(i, y + dy, 0);
                const double* drow = &d_out.at(o, y, 0);
                for (int x = x0; x < x1; ++x) irow[x + dx] += wv * drow[x];
              }
            }
          }
        }
      }
    }
  }
}

void relu_inplace(FeatureMap& fm) {
  for (double& v : fm.values) v = v > 0.0 ? v : 0.0;
}

}  // namespace

bool FeatureMap::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

FeatureMap scene_to_input(const Scene& scene) {
  FeatureMap fm(scene.channels, scene.height, scene.width);
  for (std::size_t i = 0; i < scene.pixels.size(); ++i) fm.values[i] = double(scene.pixels[i]);
  return fm;
}

void validate(const PyramidConfig& cfg) {
  if (cfg.levels.empty()) throw std::invalid_argument("pyramid: levels must be nonempty");
  for (int g : cfg.levels)
    if (g < 1) throw std::invalid_argument("pyramid: level sizes must be >= 1");
  if (cfg.channels < 1) throw std::invalid_argument("pyramid: channels must be >= 1");
}

FeatureMap conv_stack_forward(const FeatureMap& image, const ConvStackParams& params,
                              ConvStackCache* cache) {
  if (image.height < 2 || image.width < 2)
    throw std::invalid_argument("conv_stack: image must be at least 2x2");
  g_conv_evals.fetch_add(1, std::memory_order_relaxed);

  FeatureMap act1;
  conv3x3_forward(image, params.conv1, act1);
  relu_inplace(act1);

  FeatureMap act2;
  conv3x3_forward(act1, params.conv2, act2);
  relu_inplace(act2);

  const int ph = act2.height / 2, pw = act2.width / 2;
  FeatureMap pooled(act2.channels, ph, pw);
  std::vector<std::uint32_t> src(pooled.values.size());
  for (int c = 0; c < act2.channels; ++c) {
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            std::size_t idx = act2.flat(c, 2 * y + dy, 2 * x + dx);
            if (act2.values[idx] > best) {
              best = act2.values[idx];
              best_idx = std::uint32_t(idx);
            }
          }
        }
        pooled.at(c, y, x) = best;
        src[pooled.flat(c, y, x)] = best_idx;
      }
    }
  }

  if (cache) {
    cache->input = image;
    cache->act1 = std::move(act1);
    cache->act2 = std::move(act2);
    cache->pool_src = std::move(src);
  }
  return pooled;
}

void conv_stack_backward(const FeatureMap& d_out, const ConvStackParams& params,
                         const ConvStackCache& cache, ConvStackParams& grads,
                         FeatureMap* d_input) {
  // Un-pool: route each pooled gradient to its argmax cell.
  FeatureMap d_act2(cache.act2.channels, cache.act2.height, cache.act2.width);
  for (std::size_t i = 0; i < d_out.values.size(); ++i)
    d_act2.values[cache.pool_src[i]] += d_out.values[i];

  // ReLU mask for conv2 (act2 > 0 iff pre-activation > 0).
  for (std::size_t i = 0; i < d_act2.values.size(); ++i)
    if (!(cache.act2.values[i] > 0.0)) d_act2.values[i] = 0.0;

  FeatureMap d_act1(cache.act1.channels, cache.act1.height, cache.act1.width);
  conv3x3_backward(cache.act1, params.conv2, d_act2, grads.conv2, &d_act1);

  for (std::size_t i = 0; i < d_act1.values.size(); ++i)
    if (!(cache.act1.values[i] > 0.0)) d_act1.values[i] = 0.0;

  if (d_input) {
    *d_input = FeatureMap(cache.input.channels, cache.input.height, cache.input.width);
    conv3x3_backward(cache.input, params.conv1, d_act1, grads.conv1, d_input);
  } else {
    conv3x3_backward(cache.input, params.conv1, d_act1, grads.conv1, nullptr);
  }
}

std::uint64_t conv_stack_evals() { return g_conv_evals.load(std::memory_order_relaxed); }

namespace {
// Even integer split of [lo, hi) into g bins; bin k spans
// [lo + floor(k*n/g), lo + ceil((k+1)*n/g)), which is never empty.
inline void bin_range(int lo, int n, int g, int k, int& b_lo, int& b_hi) {
  b_lo = lo + (k * n) / g;
  b_hi = lo + int((std::int64_t(k + 1) * n + g - 1) / g);
}
}  // namespace

std::vector<double> spp_pool(const FeatureMap& fm, const std::array<double, 4>& box,
                             const PyramidConfig& cfg, std::vector<std::uint32_t>* src_cells) {
  validate(cfg);
  if (fm.channels != cfg.channels)
    throw std::invalid_argument("spp_pool: feature map has " + std::to_string(fm.channels) +
                                " channels, pyramid expects " + std::to_string(cfg.channels));
  if (!(box[0] >= 0.0 && box[0] < box[2] && box[2] <= 1.0 && box[1] >= 0.0 && box[1] < box[3] &&
        box[3] <= 1.0))
    throw std::invalid_argument("spp_pool: box coordinates violate 0 <= lo < hi <= 1");
  if (!fm.all_finite()) throw std::invalid_argument("spp_pool: feature map contains non-finite values");

  const int x_lo = int(std::floor(box[0] * fm.width));
  const int x_hi = std::max(x_lo + 1, int(std::ceil(box[2] * fm.width)));
  const int y_lo = int(std::floor(box[1] * fm.height));
  const int y_hi = std::max(y_lo + 1, int(std::ceil(box[3] * fm.height)));
  const int nx = x_hi - x_lo, ny = y_hi - y_lo;

  std::vector<double> out(std::size_t(cfg.dim()));
  if (src_cells) src_cells->assign(out.size(), 0);
  std::size_t at = 0;
  for (int g : cfg.levels) {
    for (int by = 0; by < g; ++by) {
      int cy_lo, cy_hi;
      bin_range(y_lo, ny, g, by, cy_lo, cy_hi);
      for (int bx = 0; bx < g; ++bx) {
        int cx_lo, cx_hi;
        bin_range(x_lo, nx, g, bx, cx_lo, cx_hi);
        for (int c = 0; c < cfg.channels; ++c, ++at) {
          double best = -std::numeric_limits<double>::infinity();
          std::uint32_t best_idx = 0;
          for (int y = cy_lo; y < cy_hi; ++y) {
            for (int x = cx_lo; x < cx_hi; ++x) {
              std::size_t idx = fm.flat(c, y, x);
              if (fm.values[idx] > best) {
                best = fm.values[idx];
                best_idx = std::uint32_t(idx);
              }
            }
          }
          out[at] = best;
          if (src_cells) (*src_cells)[at] = best_idx;
        }
      }
    }
  }
  return out;
}

void spp_pool_backward(const std::vector<double>& d_out,
                       const std::vector<std::uint32_t>& src_cells, FeatureMap& d_fm) {
  if (d_out.size() != src_cells.size())
    throw std::invalid_argument("spp_pool_backward: gradient/argmax size mismatch");
  for (std::size_t i = 0; i < d_out.size(); ++i) d_fm.values[src_cells[i]] += d_out[i];
}

Matrix encode_proposals(const Scene& scene, const std::vector<Proposal>& proposals,
                        const ConvStackParams& params, const PyramidConfig& cfg) {
  if (proposals.empty()) throw std::invalid_argument("encode_proposals: no proposals");
  FeatureMap fm = conv_stack_forward(scene_to_input(scene), params);
  Matrix d(proposals.size(), std::size_t(cfg.dim()));
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    std::vector<double> row = spp_pool(fm, proposals[i].coords, cfg);
    std::copy(row.begin(), row.end(), d.row(i));
  }
  return d;
}

}  // namespace iahash
