#pragma once

#include <vector>

#include "iahash/matrix.hpp"

namespace iahash {

// Y = X * W + bias (bias broadcast per row).
Matrix affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias);

struct AffineGrads {
  Matrix d_x;
  Matrix d_w;
  std::vector<double> d_bias;
};

// Exact gradients of a scalar loss given dY.
AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& d_y);

// Y = max(0, X) elementwise. The subgradient at exactly 0 is 0.
Matrix relu_forward(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& d_y);

}  // namespace iahash
