#include "taas/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taas {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m;
  m.rows = values.size();
  m.cols = values.size() ? values.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& row : values) {
    if (row.size() != m.cols) {
      throw std::invalid_argument("from_rows: ragged rows");
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

Matrix Matrix::row_vector(std::vector<double> values) {
  Matrix m;
  m.rows = 1;
  m.cols = values.size();
  m.data = std::move(values);
  return m;
}

std::string Matrix::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ " + a.shape_str() + " x " +
                                b.shape_str());
  }
  Matrix out(a.rows, b.cols);
  // i-k-j order keeps the inner loop contiguous in b and out.
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[i * a.cols];
    double* orow = &out.data[i * out.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) {
        orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ " + a.shape_str() +
                                " x " + b.shape_str() + "^T");
  }
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[i * a.cols];
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[j * b.cols];
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) {
    throw std::invalid_argument("matmul_tn: inner dimensions differ " + a.shape_str() +
                                "^T x " + b.shape_str());
  }
  Matrix out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[k * a.cols];
    const double* brow = &b.data[k * b.cols];
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* orow = &out.data[i * out.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.data[i * m.cols];
    double mx = row[0];
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    double* orow = &out.data[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < m.cols; ++j) orow[j] /= sum;
  }
  return out;
}

Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps) {
  if (gain.size() != m.cols || bias.size() != m.cols) {
    throw std::invalid_argument("layer_norm: gain/bias length " + std::to_string(gain.size()) +
                                "/" + std::to_string(bias.size()) + " vs cols " +
                                std::to_string(m.cols));
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.data[i * m.cols];
    double mean = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) mean += row[j];
    mean /= static_cast<double>(m.cols);
    double var = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(m.cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    double* orow = &out.data[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) {
      orow[j] = (row[j] - mean) * inv * gain[j] + bias[j];
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "sub");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (double& v : out.data) v *= c;
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data.begin(), m.data.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout_mask: rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
  Matrix m(rows, cols, 1.0);
  if (rate == 0.0) return m;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (double& v : m.data) v = dist(rng) < rate ? 0.0 : keep;
  return m;
}

}  // namespace taas
