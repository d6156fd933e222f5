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

#include "lbb/ar.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "lbb/error.h"

namespace lbb {

double ArDecomposition::ConditionalMean(size_t i,
                                        std::span<const double> prefix) const {
  double acc = 0.0;
  const auto inv_row = chol_inv.row(i);
  for (size_t j = 0; j < i; ++j) acc += inv_row[j] * prefix[j];
  return -chol(i, i) * acc;
}

double ArDecomposition::LogDensity(std::span<const double> y) const {
  if (y.size() != dim()) {
    Fail(ErrorCode::kDimensionMismatch, "AR log density dimension mismatch");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (size_t i = 0; i < dim(); ++i) {
    const double s = ConditionalStddev(i);
    const double u = (y[i] - ConditionalMean(i, y)) / s;
    total += -0.5 * u * u - std::log(s) - half_log_2pi;
  }
  return total;
}

ArDecomposition CovarianceToAr(const Matrix& covariance) {
  ArDecomposition ar;
  ar.chol = Cholesky(covariance);
  ar.chol_inv = LowerTriangularInverse(ar.chol);
  return ar;
}

// L = Rᵀ for the QR factorization Jᵀ = QR, which equals chol(JJᵀ) without
// forming JJᵀ.
ArDecomposition GaussianToAr(const Matrix& jacobian) {
  if (jacobian.rows() != jacobian.cols()) {
    Fail(ErrorCode::kDimensionMismatch, "Jacobian must be square");
  }
  const size_t d = jacobian.rows();
  Matrix r = jacobian.Transposed();
  std::vector<double> v(d);
  double scale = 0.0;
  for (double x : r.data()) scale = std::max(scale, std::fabs(x));
  for (size_t c = 0; c < d; ++c) {
    double norm = 0.0;
    for (size_t i = c; i < d; ++i) norm = std::hypot(norm, r(i, c));
    if (norm == 0.0) continue;
    const double alpha = r(c, c) > 0 ? -norm : norm;
    for (size_t i = c; i < d; ++i) v[i] = r(i, c);
    v[c] -= alpha;
    double vv = 0.0;
    for (size_t i = c; i < d; ++i) vv += v[i] * v[i];
    for (size_t k = c; k < d; ++k) {
      double dot = 0.0;
      for (size_t i = c; i < d; ++i) dot += v[i] * r(i, k);
      const double f = 2.0 * dot / vv;
      for (size_t i = c; i < d; ++i) r(i, k) -= f * v[i];
    }
  }
  const double tol = scale * double(d) * std::numeric_limits<double>::epsilon();
  ArDecomposition ar;
  ar.chol = Matrix(d, d);
  for (size_t i = 0; i < d; ++i) {
    const double diag = r(i, i);
    if (!std::isfinite(diag) || std::fabs(diag) <= tol) {
      Fail(ErrorCode::kNotPositiveDefinite, "Jacobian is singular");
    }
    // Flip row i of R so its diagonal is positive; LLᵀ is unchanged.
    const double sign = diag > 0 ? 1.0 : -1.0;
    for (size_t j = i; j < d; ++j) ar.chol(j, i) = sign * r(i, j);
  }
  ar.chol_inv = LowerTriangularInverse(ar.chol);
  return ar;
}

}  // namespace lbb
