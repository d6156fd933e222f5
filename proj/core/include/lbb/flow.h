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

#ifndef LBB_FLOW_H_
#define LBB_FLOW_H_

// Invertible flow runtime: layer variants, composite models, exact
// Jacobians, per-coordinate maps and change-of-variables densities.
//
// Every map runs data -> latent (x -> z). Conditioner MLPs optionally take an
// external context vector appended to their inputs; the dequantizer uses it
// to condition on the integer datum.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "lbb/ar.h"
#include "lbb/linalg.h"

namespace lbb {

using Vec = std::vector<double>;

// Bound on conditioner log-scales: a = kLogScaleBound * tanh(raw / bound).
inline constexpr double kLogScaleBound = 5.0;

// Fully connected network: tanh between layers, linear output.
struct Mlp {
  struct Dense {
    Matrix weight;  // out x in
    Vec bias;
  };
  std::vector<Dense> layers;

  size_t input_dim() const { return layers.front().weight.cols(); }
  size_t output_dim() const { return layers.back().weight.rows(); }

  Vec Forward(std::span<const double> input) const;
  // d output / d input[0 .. n_inputs).
  Matrix Jacobian(std::span<const double> input, size_t n_inputs) const;
};

// Zeroes connections so that output pair i (log-scale i and shift i) only
// sees inputs j < i. Context inputs (past `dim`) feed every hidden unit.
void ApplyAutoregressiveMasks(Mlp& mlp, size_t dim);

struct ActNorm {
  Vec scale;
  Vec bias;
};

// z_B = W x_B on consecutive blocks of size `block` (block == dim is a plain
// dense layer). W^-1, log|det W| and the AR factors used by the block codec
// are derived once at construction.
class DenseLinear {
 public:
  DenseLinear(size_t dim, Matrix weight);

  size_t dim() const { return dim_; }
  size_t block() const { return weight_.rows(); }
  size_t num_blocks() const { return dim_ / block(); }
  const Matrix& weight() const { return weight_; }
  const Matrix& inverse() const { return derived_->inverse; }
  double block_log_abs_det() const { return derived_->log_abs_det; }
  const ArDecomposition& forward_ar() const { return derived_->forward_ar; }
  const ArDecomposition& inverse_ar() const { return derived_->inverse_ar; }

 private:
  struct Derived {
    Matrix inverse;
    double log_abs_det = 0.0;
    ArDecomposition forward_ar;
    ArDecomposition inverse_ar;
  };
  size_t dim_;
  Matrix weight_;
  std::shared_ptr<const Derived> derived_;
};

// Half the coordinates pass through; the other half gets
// z_i = exp(a_i) x_i + t_i with (a, t) from an MLP of the passed half and the
// context. flip = false passes the first floor(d/2) coordinates.
struct AffineCoupling {
  size_t dim = 0;
  bool flip = false;
  size_t context_dim = 0;
  Mlp conditioner;  // in: |pass| + context, out: 2 |transformed|

  std::vector<size_t> PassIndices() const;
  std::vector<size_t> TransformedIndices() const;
};

// z_i = exp(a_i(x_<i)) x_i + t_i(x_<i) with a masked conditioner.
struct Autoregressive {
  size_t dim = 0;
  size_t context_dim = 0;
  Mlp conditioner;  // in: dim + context, out: 2 dim
};

// Elementwise logistic; maps R^d into (0, 1)^d.
struct SigmoidSquash {
  size_t dim = 0;
};

using FlowLayer =
    std::variant<ActNorm, DenseLinear, AffineCoupling, Autoregressive,
                 SigmoidSquash>;

enum class LayerTag : uint8_t {
  kActNorm = 1,
  kDenseLinear = 2,
  kAffineCoupling = 3,
  kAutoregressive = 4,
  kSigmoidSquash = 5,
};

LayerTag TagOf(const FlowLayer& layer);
size_t LayerDim(const FlowLayer& layer);
size_t LayerContextDim(const FlowLayer& layer);

// Monotone scalar map of one coordinate with its derivative and inverse.
struct ScalarMap {
  enum class Kind : uint8_t { kAffine, kSigmoid, kLogit };
  Kind kind = Kind::kAffine;
  double scale = 1.0;
  double shift = 0.0;

  double Forward(double x) const;
  double Derivative(double x) const;
  double Inverse(double z) const;
  ScalarMap Inverted() const;
};

Vec Forward(const FlowLayer& layer, std::span<const double> x,
            std::span<const double> context = {});
Vec Inverse(const FlowLayer& layer, std::span<const double> z,
            std::span<const double> context = {});
// Natural log |det J| at x.
double LogAbsDet(const FlowLayer& layer, std::span<const double> x,
                 std::span<const double> context = {});
Matrix Jacobian(const FlowLayer& layer, std::span<const double> x,
                std::span<const double> context = {});

// Per-coordinate maps of an elementwise-structured layer evaluated at x:
// entry i transforms x_i given the rest. Pass-through coordinates of a
// coupling get the identity. Autoregressive maps read only x_<i. Throws
// UnsupportedLayer for DenseLinear.
std::vector<ScalarMap> ElementwiseMaps(const FlowLayer& layer,
                                       std::span<const double> x,
                                       std::span<const double> context = {});
// Coordinates a layer copies unchanged (couplings only).
std::vector<bool> PassThroughMask(const FlowLayer& layer);

// (z_i, dz_i/dx_i) given the other coordinates in `x`.
std::pair<double, double> CoordForward(const FlowLayer& layer, size_t i,
                                       double x_i, std::span<const double> x,
                                       std::span<const double> context = {});
double CoordInverse(const FlowLayer& layer, size_t i, double z_i,
                    std::span<const double> x,
                    std::span<const double> context = {});

// Composite f = f_K o ... o f_1 with a standard Gaussian prior on z.
class FlowModel {
 public:
  FlowModel() = default;
  FlowModel(size_t dim, std::vector<FlowLayer> layers, size_t context_dim = 0);

  size_t dim() const { return dim_; }
  size_t context_dim() const { return context_dim_; }
  const std::vector<FlowLayer>& layers() const { return layers_; }

  Vec Forward(std::span<const double> x,
              std::span<const double> context = {}) const;
  Vec Inverse(std::span<const double> z,
              std::span<const double> context = {}) const;
  // Returns z and accumulates sum_i log|det J_i| (natural log).
  Vec ForwardWithLogDet(std::span<const double> x, double& log_det,
                        std::span<const double> context = {}) const;
  Matrix Jacobian(std::span<const double> x,
                  std::span<const double> context = {}) const;

  // log p(x) = log N(f(x); 0, I) + sum_i log|det J_i| (natural log).
  double LogDensity(std::span<const double> x,
                    std::span<const double> context = {}) const;
  // -log2 p(x).
  double NegLogDensityBits(std::span<const double> x,
                           std::span<const double> context = {}) const;

 private:
  void CheckInput(std::span<const double> v,
                  std::span<const double> context) const;

  size_t dim_ = 0;
  size_t context_dim_ = 0;
  std::vector<FlowLayer> layers_;
};

// Standard normal log density of a vector (natural log).
double StandardNormalLogDensity(std::span<const double> z);

}  // namespace lbb

#endif  // LBB_FLOW_H_
