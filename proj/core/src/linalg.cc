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

#include "lbb/linalg.h"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "lbb/error.h"

namespace lbb {

Matrix::Matrix(size_t rows, size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    Fail(ErrorCode::kDimensionMismatch, "matrix data size mismatch");
  }
}

Matrix Matrix::Identity(size_t n) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::Diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::Transposed() const {
  Matrix t(cols_, rows_);
  for (size_t r = 0; r < rows_; ++r) {
    for (size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    Fail(ErrorCode::kDimensionMismatch, "matrix product shape mismatch");
  }
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto src = b.row(k);
      for (size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    Fail(ErrorCode::kDimensionMismatch, "matrix-vector shape mismatch");
  }
  std::vector<double> y(a.rows(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double acc = 0.0;
    for (size_t j = 0; j < x.size(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Matrix GramOuter(const Matrix& a) {
  Matrix out(a.rows(), a.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j <= i; ++j) {
      const auto ri = a.row(i);
      const auto rj = a.row(j);
      double acc = 0.0;
      for (size_t k = 0; k < a.cols(); ++k) acc += ri[k] * rj[k];
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

Matrix Cholesky(const Matrix& a) {
  const size_t n = a.rows();
  if (a.cols() != n) {
    Fail(ErrorCode::kDimensionMismatch, "Cholesky of a non-square matrix");
  }
  Matrix l(n, n);
  for (size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) {
      Fail(ErrorCode::kNotPositiveDefinite,
           "non-positive pivot at row " + std::to_string(j));
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (size_t i = j + 1; i < n; ++i) {
      double acc = a(i, j);
      for (size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / ljj;
    }
  }
  return l;
}

Matrix LowerTriangularInverse(const Matrix& lower) {
  const size_t n = lower.rows();
  Matrix inv(n, n);
  for (size_t j = 0; j < n; ++j) {
    if (lower(j, j) == 0.0) {
      Fail(ErrorCode::kNonInvertible, "zero diagonal in triangular matrix");
    }
    inv(j, j) = 1.0 / lower(j, j);
    // Forward substitution for column j.
    for (size_t i = j + 1; i < n; ++i) {
      double acc = 0.0;
      for (size_t k = j; k < i; ++k) acc += lower(i, k) * inv(k, j);
      inv(i, j) = -acc / lower(i, i);
    }
  }
  return inv;
}

namespace {

// In-place LU with partial pivoting; returns the permutation sign, or 0 when
// a pivot vanishes.
double LuDecompose(Matrix& a, std::vector<size_t>& perm) {
  const size_t n = a.rows();
  perm.resize(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  double sign = 1.0;
  for (size_t c = 0; c < n; ++c) {
    size_t pivot = c;
    for (size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a(r, c)) > std::fabs(a(pivot, c))) pivot = r;
    }
    if (a(pivot, c) == 0.0) return 0.0;
    if (pivot != c) {
      for (size_t k = 0; k < n; ++k) std::swap(a(c, k), a(pivot, k));
      std::swap(perm[c], perm[pivot]);
      sign = -sign;
    }
    for (size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      a(r, c) = f;
      for (size_t k = c + 1; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return sign;
}

}  // namespace

SignLogDet LogDeterminant(const Matrix& a) {
  if (a.rows() != a.cols()) {
    Fail(ErrorCode::kDimensionMismatch, "determinant of a non-square matrix");
  }
  Matrix lu = a;
  std::vector<size_t> perm;
  double sign = LuDecompose(lu, perm);
  if (sign == 0.0) {
    return {0.0, -std::numeric_limits<double>::infinity()};
  }
  double log_abs = 0.0;
  for (size_t i = 0; i < lu.rows(); ++i) {
    if (lu(i, i) < 0.0) sign = -sign;
    log_abs += std::log(std::fabs(lu(i, i)));
  }
  return {sign, log_abs};
}

Matrix Inverse(const Matrix& a) {
  const size_t n = a.rows();
  if (a.cols() != n) {
    Fail(ErrorCode::kDimensionMismatch, "inverse of a non-square matrix");
  }
  Matrix lu = a;
  std::vector<size_t> perm;
  if (LuDecompose(lu, perm) == 0.0) {
    Fail(ErrorCode::kNonInvertible, "singular matrix");
  }
  Matrix inv(n, n);
  std::vector<double> col(n);
  for (size_t j = 0; j < n; ++j) {
    for (size_t i = 0; i < n; ++i) col[i] = (perm[i] == j) ? 1.0 : 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t k = 0; k < i; ++k) col[i] -= lu(i, k) * col[k];
    }
    for (size_t i = n; i-- > 0;) {
      for (size_t k = i + 1; k < n; ++k) col[i] -= lu(i, k) * col[k];
      col[i] /= lu(i, i);
    }
    for (size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

}  // namespace lbb
