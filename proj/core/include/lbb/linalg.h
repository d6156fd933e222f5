// Copyright 2026 The LBB Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LBB_LINALG_H_
#define LBB_LINALG_H_

// Small dense row-major matrices. Enough linear algebra for Jacobians of toy
// flows: products, Cholesky, triangular inverses and LU determinants.

#include <cstddef>
#include <span>
#include <vector>

namespace lbb {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(size_t rows, size_t cols, std::vector<double> data);

  static Matrix Identity(size_t n);
  static Matrix Diagonal(std::span<const double> diag);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix Transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

// a * a^T.
Matrix GramOuter(const Matrix& a);

// Lower-triangular L with L L^T = a. Throws NotPositiveDefinite.
Matrix Cholesky(const Matrix& a);
// Inverse of a nonsingular lower-triangular matrix.
Matrix LowerTriangularInverse(const Matrix& lower);

struct SignLogDet {
  double sign = 0.0;     // -1, 0 or +1
  double log_abs = 0.0;  // natural log of |det|
};
// LU with partial pivoting.
SignLogDet LogDeterminant(const Matrix& a);
// Throws NonInvertible on a singular pivot.
Matrix Inverse(const Matrix& a);

}  // namespace lbb

#endif  // LBB_LINALG_H_
