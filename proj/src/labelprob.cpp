#include "iahash/labelprob.hpp"

#include <cmath>
#include <stdexcept>

namespace iahash {

PooledScores cross_hypothesis_maxpool(const Matrix& logits) {
  if (logits.rows == 0 || logits.cols == 0)
    throw std::invalid_argument("cross_hypothesis_maxpool: empty logits");
  PooledScores out;
  out.m.assign(logits.cols, 0.0);
  out.argmax_rows.assign(logits.cols, 0);
  for (std::size_t j = 0; j < logits.cols; ++j) {
    double best = logits(0, j);
    std::size_t best_row = 0;
    for (std::size_t i = 1; i < logits.rows; ++i) {
      if (logits(i, j) > best) {
        best = logits(i, j);
        best_row = i;
      }
    }
    out.m[j] = best;
    out.argmax_rows[j] = best_row;
  }
  return out;
}

namespace {
void softmax_shifted(const double* in, double* out, std::size_t n) {
  double peak = in[0];
  for (std::size_t k = 1; k < n; ++k) peak = std::max(peak, in[k]);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = std::exp(in[k] - peak);
    total += out[k];
  }
  for (std::size_t k = 0; k < n; ++k) out[k] /= total;
}
}  // namespace

std::vector<double> image_probability(const PooledScores& pooled) {
  std::vector<double> p(pooled.m.size());
  softmax_shifted(pooled.m.data(), p.data(), p.size());
  return p;
}

ClassificationResult classification_loss(const std::vector<double>& p, const LabelVector& y) {
  if (p.size() != y.y.size())
    throw std::invalid_argument("classification_loss: probability/label length mismatch");
  int positives = y.count();
  if (positives < 1)
    throw std::invalid_argument("classification_loss: image has no labels; exclude it upstream");
  ClassificationResult out;
  out.grad_m.resize(p.size());
  const double share = 1.0 / positives;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (y.y[j]) {
      out.loss -= share * std::log(p[j]);
      out.grad_m[j] = p[j] - share;
    } else {
      out.grad_m[j] = p[j];
    }
  }
  return out;
}

Matrix proposal_probabilities(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i)
    softmax_shifted(logits.row(i), p.row(i), logits.cols);
  return p;
}

Matrix row_softmax_backward(const Matrix& p, const Matrix& d_p) {
  if (p.rows != d_p.rows || p.cols != d_p.cols)
    throw std::invalid_argument("row_softmax_backward: shape mismatch " + p.shape() + " vs " +
                                d_p.shape());
  Matrix d_logits(p.rows, p.cols);
  for (std::size_t i = 0; i < p.rows; ++i) {
    const double* prow = p.row(i);
    const double* drow = d_p.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) dot += prow[j] * drow[j];
    double* out = d_logits.row(i);
    for (std::size_t j = 0; j < p.cols; ++j) out[j] = prow[j] * (drow[j] - dot);
  }
  return d_logits;
}

}  // namespace iahash
