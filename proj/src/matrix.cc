// src/matrix.cc

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

#include "ctdnn/matrix.h"

#include <cmath>
#include <utility>

#include "ctdnn/errors.h"

namespace ctdnn {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto &r : rows) {
    if (r.size() != cols_)
      throw ShapeError("ragged initializer: row of length " +
                       std::to_string(r.size()) + " in a matrix with " +
                       std::to_string(cols_) + " columns");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_)
    throw ShapeError("value count " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " +
                     b.shape_string());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      axpy(aik, b.row(k), out_row);
    }
  }
  return out;
}

Matrix transpose(const Matrix &a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double *pa = a.data(), *pb = b.data();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += pa[i] * pb[i];
    s1 += pa[i + 1] * pb[i + 1];
    s2 += pa[i + 2] * pb[i + 2];
    s3 += pa[i + 3] * pb[i + 3];
  }
  for (; i < n; ++i) s0 += pa[i] * pb[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double *px = x.data();
  double *py = y.data();
  for (std::size_t i = 0; i < n; ++i) py[i] += alpha * px[i];
}

ColumnStats rowwise_mean_std(const Matrix &x) {
  if (x.rows() == 0)
    throw EmptyInputError("rowwise_mean_std: input has zero rows");
  const std::size_t t_len = x.rows(), dim = x.cols();
  ColumnStats s{Vector(dim, 0.0), Vector(dim, 0.0)};
  for (std::size_t t = 0; t < t_len; ++t) axpy(1.0, x.row(t), s.mean);
  for (double &m : s.mean) m /= static_cast<double>(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto r = x.row(t);
    for (std::size_t j = 0; j < dim; ++j) {
      double d = r[j] - s.mean[j];
      s.std[j] += d * d;
    }
  }
  for (double &v : s.std) v = std::sqrt(v / static_cast<double>(t_len));
  return s;
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ctdnn
