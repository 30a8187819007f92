#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tcr {

// Dense row-major matrix of doubles. The workhorse container for embedding
// batches, similarity matrices and prediction rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data_.data() + i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_.data() + i * cols_, cols_);
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Sequential left-to-right accumulation. The reduction order is fixed on
// purpose: identical inputs give bit-identical results on every run.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
double norm(std::span<const double> v);
double distance(std::span<const double> a, std::span<const double> b);

// Mean over rows (a length-cols vector).
std::vector<double> column_mean(const Matrix& m);

// Copy of rows [begin, end).
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end);

bool all_finite(std::span<const double> v);
bool all_finite(const Matrix& m);

}  // namespace tcr
