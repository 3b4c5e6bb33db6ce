#pragma once

#include <vector>

#include "iahash/matrix.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

// Per-category column maxima over all proposals, with the row that supplied
// each maximum (ties go to the smallest row index).
struct PooledScores {
  std::vector<double> m;
  std::vector<std::size_t> argmax_rows;
};

PooledScores cross_hypothesis_maxpool(const Matrix& logits);

// Softmax of the pooled scores, computed with a max shift.
std::vector<double> image_probability(const PooledScores& pooled);

struct ClassificationResult {
  double loss = 0.0;
  std::vector<double> grad_m;  // d loss / d pooled score
};

// Cross entropy against the uniform distribution over the image's labels:
//   loss = -sum_{j in labels} log(p_j) / |labels|
//   grad_m[j] = p_j - 1/|labels| when y_j = 1, else p_j.
ClassificationResult classification_loss(const std::vector<double>& p, const LabelVector& y);

// Row-wise softmax of the proposal logits.
Matrix proposal_probabilities(const Matrix& logits);

// Backward of a row-wise softmax: given P and dP, returns d logits.
Matrix row_softmax_backward(const Matrix& p, const Matrix& d_p);

}  // namespace iahash
