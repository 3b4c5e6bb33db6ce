#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace iahash {

// Dense row-major matrix of 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  double* row(std::size_t i) { return values.data() + i * cols; }
  const double* row(std::size_t i) const { return values.data() + i * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
  bool all_finite() const;
  std::string shape() const;  // e.g. "3x4"

  static Matrix identity(std::size_t n);
};

bool operator==(const Matrix& a, const Matrix& b);

// C[i][k] = sum_j A[i][j] * B[j][k], accumulated in ascending j.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

}  // namespace iahash
