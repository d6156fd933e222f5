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

#ifndef LBB_AR_H_
#define LBB_AR_H_

#include <cstddef>
#include <span>

#include "lbb/linalg.h"

namespace lbb {

// A zero-mean Gaussian N(0, J J^T) rewritten as a linear autoregressive
// chain. With L the Cholesky factor of J J^T,
//
//   y_i | y_<i ~ N(-L_ii * sum_{j<i} (L^-1)_ij y_j, L_ii^2),
//
// which reproduces the joint exactly and can be coded one coordinate at a
// time in order i = 1..d.
struct ArDecomposition {
  Matrix chol;      // L, lower triangular
  Matrix chol_inv;  // L^-1, lower triangular

  size_t dim() const { return chol.rows(); }
  // Mean of y_i given y_<i (only the first i entries of `prefix` are read).
  double ConditionalMean(size_t i, std::span<const double> prefix) const;
  double ConditionalStddev(size_t i) const { return chol(i, i); }
  // Sum of the conditional log densities (natural log).
  double LogDensity(std::span<const double> y) const;
};

ArDecomposition GaussianToAr(const Matrix& jacobian);
ArDecomposition CovarianceToAr(const Matrix& covariance);

}  // namespace lbb

#endif  // LBB_AR_H_
