#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace taas {

/// Dense row-major matrix of doubles. Row and column vectors are 1xN / Nx1.
/// Everything downstream (topic model, transformer, attention) is built on
/// these kernels, so they stay simple and double-precision.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> values);
  static Matrix row_vector(std::vector<double> values);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
};

/// Standard product; throws std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Row-wise softmax with per-row max subtraction; rows of the result sum to 1.
Matrix softmax_rows(const Matrix& m);

/// Per-row normalization to mean 0 / variance 1 (population variance, eps-guarded),
/// then elementwise gain and bias. gain/bias length must equal m.cols.
Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps = 1e-5);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

bool all_finite(const Matrix& m);

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// Inverted-dropout mask: entries are 0 with probability rate, else 1/(1-rate).
/// rate 0 yields all ones. Evaluation mode simply skips applying a mask.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng);

}  // namespace taas
