#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// Copies the listed rows, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Kernels below come in pairs: the default entry point is OpenMP-parallel over
// output rows, the *_reference variant is a plain serial loop kept for tests
// and benchmarks. Every output cell is accumulated left to right in both, so
// the two agree bit for bit at any thread count.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_reference(const Matrix& a, const Matrix& b);

/// a * bᵀ, the layout used for scores = φ Wᵀ.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix matmul_transposed_reference(const Matrix& a, const Matrix& b);

/// aᵀ * b, used for weight gradients.
Matrix transposed_matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

std::vector<double> row_l2_norms(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// log Σ exp(v), shifted by max(v).
double log_sum_exp(std::span<const double> v);

/// Softmax of v written into out (same length as v).
void softmax(std::span<const double> v, std::span<double> out);

bool all_finite(std::span<const double> v);

/// Number of OpenMP threads used by the parallel kernels; 0 leaves the
/// runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace mmr
