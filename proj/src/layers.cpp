#include "iahash/layers.hpp"

#include <stdexcept>

namespace iahash {

Matrix affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
  if (x.cols != w.rows)
    throw std::invalid_argument("affine: input/weight mismatch: " + x.shape() + " * " + w.shape());
  if (bias.size() != w.cols)
    throw std::invalid_argument("affine: bias length " + std::to_string(bias.size()) +
                                " != output width " + std::to_string(w.cols));
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* row = y.row(i);
    for (std::size_t k = 0; k < y.cols; ++k) row[k] += bias[k];
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& d_y) {
  if (d_y.rows != x.rows || d_y.cols != w.cols)
    throw std::invalid_argument("affine backward: dY shape " + d_y.shape() + " does not match " +
                                std::to_string(x.rows) + "x" + std::to_string(w.cols));
  AffineGrads g;
  g.d_x = matmul(d_y, transpose(w));
  g.d_w = matmul(transpose(x), d_y);
  g.d_bias.assign(w.cols, 0.0);
  for (std::size_t i = 0; i < d_y.rows; ++i) {
    const double* row = d_y.row(i);
    for (std::size_t k = 0; k < d_y.cols; ++k) g.d_bias[k] += row[k];
  }
  return g;
}

Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& d_y) {
  if (x.rows != d_y.rows || x.cols != d_y.cols)
    throw std::invalid_argument("relu backward: shape mismatch " + x.shape() + " vs " + d_y.shape());
  Matrix d_x = d_y;
  for (std::size_t i = 0; i < d_x.values.size(); ++i)
    if (!(x.values[i] > 0.0)) d_x.values[i] = 0.0;
  return d_x;
}

}  // namespace iahash
