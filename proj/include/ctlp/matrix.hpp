#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ctlp {

/// Dense row-major matrix of doubles. All numerical work in the pipeline runs
/// in double precision; single precision exists only at the file boundary.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// a (n×k) · b (k×m)
Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ (k×n)ᵀ · b (k×m) without materializing the transpose
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);
// a (n×k) · bᵀ (m×k)ᵀ
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);

// Copies `block` into columns [col_offset, col_offset + block.cols()) of `dst`.
void set_column_block(Matrix& dst, const Matrix& block, std::size_t col_offset);

// L2-normalizes each row in place; all-zero rows stay zero.
void normalize_rows(Matrix& m);

// Normalizes each `block_width`-wide column block of every row independently.
void normalize_row_blocks(Matrix& m, std::size_t block_width);

}  // namespace ctlp
