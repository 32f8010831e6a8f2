#include "ctlp/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ctlp {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data size does not match shape");
  }
}

void Matrix::fill(double value) {
  for (auto& v : data_) v = value;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const double* src = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transpose_a: row mismatch");
  Matrix out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* src = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(r, i);
      if (s == 0.0) continue;
      double* dst = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transpose_b: column mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

void set_column_block(Matrix& dst, const Matrix& block, std::size_t col_offset) {
  if (block.rows() != dst.rows() || col_offset + block.cols() > dst.cols()) {
    throw std::invalid_argument("set_column_block: block does not fit");
  }
  for (std::size_t r = 0; r < block.rows(); ++r) {
    auto src = block.row(r);
    auto out = dst.row(r);
    for (std::size_t c = 0; c < block.cols(); ++c) out[col_offset + c] = src[c];
  }
}

void normalize_row_blocks(Matrix& m, std::size_t block_width) {
  if (block_width == 0 || m.cols() % block_width != 0) {
    throw std::invalid_argument("normalize_row_blocks: width must divide column count");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t off = 0; off < m.cols(); off += block_width) {
      auto block = row.subspan(off, block_width);
      const double n = l2_norm(block);
      if (n == 0.0) continue;
      for (auto& v : block) v /= n;
    }
  }
}

void normalize_rows(Matrix& m) {
  if (m.cols() == 0) return;
  normalize_row_blocks(m, m.cols());
}

}  // namespace ctlp
