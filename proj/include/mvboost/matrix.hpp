#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "mvboost/error.hpp"

namespace mvboost {

// Dense row-major matrix of doubles. Rows are the unit of access everywhere in
// the library (observations), so row() hands out a contiguous span.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Sample covariance (n - 1 denominator) of the given rows of m.
inline Matrix sample_covariance(const Matrix& m, std::span<const std::size_t> rows) {
  const std::size_t q = m.cols();
  const std::size_t n = rows.size();
  Matrix cov(q, q);
  if (n < 2) return cov;
  std::vector<double> mean(q, 0.0);
  for (auto r : rows)
    for (std::size_t j = 0; j < q; ++j) mean[j] += m(r, j);
  for (auto& v : mean) v /= static_cast<double>(n);
  for (auto r : rows) {
    for (std::size_t i = 0; i < q; ++i) {
      const double di = m(r, i) - mean[i];
      for (std::size_t j = i; j < q; ++j) cov(i, j) += di * (m(r, j) - mean[j]);
    }
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i; j < q; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

}  // namespace mvboost
