// include/ctdnn/matrix.h

// Copyright 2026  The ctdnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CTDNN_MATRIX_H_
#define CTDNN_MATRIX_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ctdnn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.  Rows of a sequence matrix are time
/// frames, so consecutive frames are contiguous in memory.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Builds from nested rows; every row must have the same length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  Matrix(std::size_t rows, std::size_t cols, Vector values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  /// `count` consecutive rows starting at `first`, flattened.
  std::span<const double> rows_flat(std::size_t first, std::size_t count) const {
    return {data_.data() + first * cols_, count * cols_};
  }
  std::span<double> rows_flat(std::size_t first, std::size_t count) {
    return {data_.data() + first * cols_, count * cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const Vector &data() const { return data_; }

  bool operator==(const Matrix &other) const = default;

  std::string shape_string() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// Standard product; throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix &a, const Matrix &b);

Matrix transpose(const Matrix &a);

/// Fixed-order dot product (four interleaved partial sums, combined in a fixed
/// order) so that repeated runs give identical bits.
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

struct ColumnStats {
  Vector mean;
  Vector std;
};

/// Per-column mean and population standard deviation (divide by T), reducing
/// over rows left to right.  Throws EmptyInputError on zero rows.
ColumnStats rowwise_mean_std(const Matrix &x);

bool all_finite(std::span<const double> values);

}  // namespace ctdnn

#endif  // CTDNN_MATRIX_H_
