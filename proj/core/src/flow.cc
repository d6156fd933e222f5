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

#include "lbb/flow.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lbb/error.h"

namespace lbb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double SoftClamp(double raw) {
  return kLogScaleBound * std::tanh(raw / kLogScaleBound);
}

double SoftClampDerivative(double raw) {
  const double t = std::tanh(raw / kLogScaleBound);
  return 1.0 - t * t;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double Softplus(double y) {
  return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
}

double Logit(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    Fail(ErrorCode::kNonInvertible, "logit of a value outside (0, 1)");
  }
  return std::log(u) - std::log1p(-u);
}

void CheckDim(std::span<const double> v, size_t dim, const char* what) {
  if (v.size() != dim) {
    Fail(ErrorCode::kDimensionMismatch,
         std::string(what) + ": expected " + std::to_string(dim) +
             " coordinates, got " + std::to_string(v.size()));
  }
}

Vec Concat(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Conditioner input of a coupling: passed coordinates then context.
Vec CouplingInput(const AffineCoupling& c, std::span<const double> x,
                  std::span<const double> context) {
  Vec in;
  in.reserve(c.dim + context.size());
  for (size_t p : c.PassIndices()) in.push_back(x[p]);
  if (c.context_dim > 0) in.insert(in.end(), context.begin(), context.end());
  return in;
}

Vec ArInput(const Autoregressive& a, std::span<const double> x,
            std::span<const double> context) {
  if (a.context_dim == 0) return Vec(x.begin(), x.end());
  return Concat(x, context);
}

void CheckContext(size_t context_dim, std::span<const double> context) {
  if (context_dim > 0) CheckDim(context, context_dim, "context");
}

}  // namespace

// --- Mlp --------------------------------------------------------------------

Vec Mlp::Forward(std::span<const double> input) const {
  Vec h(input.begin(), input.end());
  for (size_t l = 0; l < layers.size(); ++l) {
    Vec next = layers[l].weight * h;
    for (size_t i = 0; i < next.size(); ++i) {
      next[i] += layers[l].bias[i];
      if (l + 1 < layers.size()) next[i] = std::tanh(next[i]);
    }
    h = std::move(next);
  }
  return h;
}

Matrix Mlp::Jacobian(std::span<const double> input, size_t n_inputs) const {
  const Matrix& w0 = layers.front().weight;
  Matrix jac(w0.rows(), n_inputs);
  for (size_t r = 0; r < w0.rows(); ++r) {
    for (size_t c = 0; c < n_inputs; ++c) jac(r, c) = w0(r, c);
  }
  Vec h(input.begin(), input.end());
  for (size_t l = 0; l < layers.size(); ++l) {
    Vec pre = layers[l].weight * h;
    for (size_t i = 0; i < pre.size(); ++i) pre[i] += layers[l].bias[i];
    if (l + 1 == layers.size()) break;
    // Chain through tanh and the next weight matrix.
    for (size_t i = 0; i < pre.size(); ++i) {
      pre[i] = std::tanh(pre[i]);
      const double g = 1.0 - pre[i] * pre[i];
      for (double& v : jac.row(i)) v *= g;
    }
    jac = layers[l + 1].weight * jac;
    h = std::move(pre);
  }
  return jac;
}

void ApplyAutoregressiveMasks(Mlp& mlp, size_t dim) {
  const size_t in_dim = mlp.input_dim();
  std::vector<size_t> prev(in_dim, 0);
  for (size_t j = 0; j < in_dim && j < dim; ++j) prev[j] = j + 1;
  const size_t modulus = std::max<size_t>(1, dim - (dim > 0 ? 1 : 0));
  for (size_t l = 0; l < mlp.layers.size(); ++l) {
    Matrix& w = mlp.layers[l].weight;
    const bool last = l + 1 == mlp.layers.size();
    std::vector<size_t> cur(w.rows());
    for (size_t h = 0; h < w.rows(); ++h) {
      cur[h] = last ? (h % dim) : 1 + (h % modulus);
    }
    for (size_t r = 0; r < w.rows(); ++r) {
      for (size_t c = 0; c < w.cols(); ++c) {
        // Hidden units accept degrees up to their own; output i accepts
        // degrees up to i, i.e. inputs j < i.
        const bool allowed = prev[c] <= cur[r];
        if (!allowed) w(r, c) = 0.0;
      }
    }
    prev = std::move(cur);
  }
}

// --- DenseLinear ---------------------------------------------------------------

DenseLinear::DenseLinear(size_t dim, Matrix weight)
    : dim_(dim), weight_(std::move(weight)) {
  const size_t b = weight_.rows();
  if (b == 0 || weight_.cols() != b || dim_ % b != 0) {
    Fail(ErrorCode::kDimensionMismatch,
         "dense block must be square and divide the dimension");
  }
  auto derived = std::make_shared<Derived>();
  const SignLogDet det = LogDeterminant(weight_);
  if (det.sign == 0.0 || det.log_abs < std::log(1e-12)) {
    Fail(ErrorCode::kNonInvertible, "|det W| below 1e-12");
  }
  derived->log_abs_det = det.log_abs;
  derived->inverse = lbb::Inverse(weight_);
  derived->forward_ar = GaussianToAr(weight_);
  derived->inverse_ar = GaussianToAr(derived->inverse);
  derived_ = std::move(derived);
}

// --- AffineCoupling ------------------------------------------------------------

std::vector<size_t> AffineCoupling::PassIndices() const {
  const size_t half = dim / 2;
  std::vector<size_t> out;
  for (size_t i = 0; i < dim; ++i) {
    if ((i < half) != flip) out.push_back(i);
  }
  return out;
}

std::vector<size_t> AffineCoupling::TransformedIndices() const {
  const size_t half = dim / 2;
  std::vector<size_t> out;
  for (size_t i = 0; i < dim; ++i) {
    if ((i < half) == flip) out.push_back(i);
  }
  return out;
}

// --- Layer dispatch ------------------------------------------------------------

LayerTag TagOf(const FlowLayer& layer) {
  return std::visit(
      Overloaded{[](const ActNorm&) { return LayerTag::kActNorm; },
                 [](const DenseLinear&) { return LayerTag::kDenseLinear; },
                 [](const AffineCoupling&) { return LayerTag::kAffineCoupling; },
                 [](const Autoregressive&) { return LayerTag::kAutoregressive; },
                 [](const SigmoidSquash&) { return LayerTag::kSigmoidSquash; }},
      layer);
}

size_t LayerDim(const FlowLayer& layer) {
  return std::visit(
      Overloaded{[](const ActNorm& a) { return a.scale.size(); },
                 [](const DenseLinear& d) { return d.dim(); },
                 [](const AffineCoupling& c) { return c.dim; },
                 [](const Autoregressive& a) { return a.dim; },
                 [](const SigmoidSquash& s) { return s.dim; }},
      layer);
}

size_t LayerContextDim(const FlowLayer& layer) {
  if (const auto* c = std::get_if<AffineCoupling>(&layer)) return c->context_dim;
  if (const auto* a = std::get_if<Autoregressive>(&layer)) return a->context_dim;
  return 0;
}

double ScalarMap::Forward(double x) const {
  switch (kind) {
    case Kind::kAffine: return scale * x + shift;
    case Kind::kSigmoid: return Sigmoid(x);
    case Kind::kLogit: return Logit(x);
  }
  return x;
}

double ScalarMap::Derivative(double x) const {
  switch (kind) {
    case Kind::kAffine: return scale;
    case Kind::kSigmoid: return Sigmoid(x) * Sigmoid(-x);
    case Kind::kLogit: return 1.0 / (x * (1.0 - x));
  }
  return 1.0;
}

double ScalarMap::Inverse(double z) const {
  switch (kind) {
    case Kind::kAffine: return (z - shift) / scale;
    case Kind::kSigmoid: return Logit(z);
    case Kind::kLogit: return Sigmoid(z);
  }
  return z;
}

ScalarMap ScalarMap::Inverted() const {
  switch (kind) {
    case Kind::kAffine: return {Kind::kAffine, 1.0 / scale, -shift / scale};
    case Kind::kSigmoid: return {Kind::kLogit, 1.0, 0.0};
    case Kind::kLogit: return {Kind::kSigmoid, 1.0, 0.0};
  }
  return *this;
}

std::vector<ScalarMap> ElementwiseMaps(const FlowLayer& layer,
                                       std::span<const double> x,
                                       std::span<const double> context) {
  CheckDim(x, LayerDim(layer), "layer input");
  CheckContext(LayerContextDim(layer), context);
  const size_t d = x.size();
  std::vector<ScalarMap> maps(d);
  std::visit(
      Overloaded{
          [&](const ActNorm& a) {
            for (size_t i = 0; i < d; ++i) maps[i] = {ScalarMap::Kind::kAffine, a.scale[i], a.bias[i]};
          },
          [&](const DenseLinear&) {
            Fail(ErrorCode::kUnsupportedLayer,
                 "DenseLinear has no per-coordinate form");
          },
          [&](const AffineCoupling& c) {
            const auto transformed = c.TransformedIndices();
            const Vec out = c.conditioner.Forward(CouplingInput(c, x, context));
            const size_t n = transformed.size();
            for (size_t q = 0; q < n; ++q) {
              maps[transformed[q]] = {ScalarMap::Kind::kAffine,
                                      std::exp(SoftClamp(out[q])), out[n + q]};
            }
          },
          [&](const Autoregressive& a) {
            const Vec out = a.conditioner.Forward(ArInput(a, x, context));
            for (size_t i = 0; i < d; ++i) {
              maps[i] = {ScalarMap::Kind::kAffine, std::exp(SoftClamp(out[i])),
                         out[d + i]};
            }
          },
          [&](const SigmoidSquash&) {
            for (auto& m : maps) m.kind = ScalarMap::Kind::kSigmoid;
          }},
      layer);
  return maps;
}

std::vector<bool> PassThroughMask(const FlowLayer& layer) {
  std::vector<bool> mask(LayerDim(layer), false);
  if (const auto* c = std::get_if<AffineCoupling>(&layer)) {
    for (size_t p : c->PassIndices()) mask[p] = true;
  }
  return mask;
}

std::pair<double, double> CoordForward(const FlowLayer& layer, size_t i,
                                       double x_i, std::span<const double> x,
                                       std::span<const double> context) {
  if (i >= LayerDim(layer)) {
    Fail(ErrorCode::kDimensionMismatch, "coordinate index out of range");
  }
  const ScalarMap m = ElementwiseMaps(layer, x, context)[i];
  return {m.Forward(x_i), m.Derivative(x_i)};
}

double CoordInverse(const FlowLayer& layer, size_t i, double z_i,
                    std::span<const double> x,
                    std::span<const double> context) {
  if (i >= LayerDim(layer)) {
    Fail(ErrorCode::kDimensionMismatch, "coordinate index out of range");
  }
  return ElementwiseMaps(layer, x, context)[i].Inverse(z_i);
}

Vec Forward(const FlowLayer& layer, std::span<const double> x,
            std::span<const double> context) {
  CheckDim(x, LayerDim(layer), "layer input");
  if (const auto* d = std::get_if<DenseLinear>(&layer)) {
    const size_t b = d->block();
    Vec z(x.size());
    for (size_t blk = 0; blk < d->num_blocks(); ++blk) {
      const Vec zb = d->weight() * x.subspan(blk * b, b);
      std::copy(zb.begin(), zb.end(), z.begin() + blk * b);
    }
    return z;
  }
  const auto maps = ElementwiseMaps(layer, x, context);
  Vec z(x.size());
  for (size_t i = 0; i < x.size(); ++i) z[i] = maps[i].Forward(x[i]);
  return z;
}

Vec Inverse(const FlowLayer& layer, std::span<const double> z,
            std::span<const double> context) {
  CheckDim(z, LayerDim(layer), "layer input");
  CheckContext(LayerContextDim(layer), context);
  return std::visit(
      Overloaded{
          [&](const ActNorm& a) {
            Vec x(z.size());
            for (size_t i = 0; i < z.size(); ++i) x[i] = (z[i] - a.bias[i]) / a.scale[i];
            return x;
          },
          [&](const DenseLinear& d) {
            const size_t b = d.block();
            Vec x(z.size());
            for (size_t blk = 0; blk < d.num_blocks(); ++blk) {
              const Vec xb = d.inverse() * z.subspan(blk * b, b);
              std::copy(xb.begin(), xb.end(), x.begin() + blk * b);
            }
            return x;
          },
          [&](const AffineCoupling&) {
            // Passed coordinates are shared, so the maps evaluated at z equal
            // the maps evaluated at x.
            const auto maps = ElementwiseMaps(layer, z, context);
            Vec x(z.size());
            for (size_t i = 0; i < z.size(); ++i) x[i] = maps[i].Inverse(z[i]);
            return x;
          },
          [&](const Autoregressive& a) {
            const size_t d = a.dim;
            Vec x(d, 0.0);
            for (size_t i = 0; i < d; ++i) {
              const Vec out = a.conditioner.Forward(ArInput(a, x, context));
              x[i] = (z[i] - out[d + i]) * std::exp(-SoftClamp(out[i]));
            }
            return x;
          },
          [&](const SigmoidSquash&) {
            Vec x(z.size());
            for (size_t i = 0; i < z.size(); ++i) x[i] = Logit(z[i]);
            return x;
          }},
      layer);
}

double LogAbsDet(const FlowLayer& layer, std::span<const double> x,
                 std::span<const double> context) {
  CheckDim(x, LayerDim(layer), "layer input");
  CheckContext(LayerContextDim(layer), context);
  return std::visit(
      Overloaded{
          [&](const ActNorm& a) {
            double s = 0.0;
            for (double v : a.scale) s += std::log(std::fabs(v));
            return s;
          },
          [&](const DenseLinear& d) {
            return static_cast<double>(d.num_blocks()) * d.block_log_abs_det();
          },
          [&](const AffineCoupling& c) {
            const Vec out = c.conditioner.Forward(CouplingInput(c, x, context));
            const size_t n = c.TransformedIndices().size();
            double s = 0.0;
            for (size_t q = 0; q < n; ++q) s += SoftClamp(out[q]);
            return s;
          },
          [&](const Autoregressive& a) {
            const Vec out = a.conditioner.Forward(ArInput(a, x, context));
            double s = 0.0;
            for (size_t i = 0; i < a.dim; ++i) s += SoftClamp(out[i]);
            return s;
          },
          [&](const SigmoidSquash&) {
            double s = 0.0;
            for (double v : x) s -= Softplus(-v) + Softplus(v);
            return s;
          }},
      layer);
}

Matrix Jacobian(const FlowLayer& layer, std::span<const double> x,
                std::span<const double> context) {
  CheckDim(x, LayerDim(layer), "layer input");
  CheckContext(LayerContextDim(layer), context);
  const size_t d = x.size();
  return std::visit(
      Overloaded{
          [&](const ActNorm& a) { return Matrix::Diagonal(a.scale); },
          [&](const DenseLinear& dl) {
            Matrix j(d, d);
            const size_t b = dl.block();
            for (size_t blk = 0; blk < dl.num_blocks(); ++blk) {
              for (size_t r = 0; r < b; ++r) {
                for (size_t c = 0; c < b; ++c) {
                  j(blk * b + r, blk * b + c) = dl.weight()(r, c);
                }
              }
            }
            return j;
          },
          [&](const AffineCoupling& c) {
            const auto pass = c.PassIndices();
            const auto transformed = c.TransformedIndices();
            const Vec in = CouplingInput(c, x, context);
            const Vec out = c.conditioner.Forward(in);
            const Matrix dout = c.conditioner.Jacobian(in, pass.size());
            const size_t n = transformed.size();
            Matrix j = Matrix::Identity(d);
            for (size_t q = 0; q < n; ++q) {
              const size_t i = transformed[q];
              const double a = SoftClamp(out[q]);
              const double ea = std::exp(a);
              const double da = SoftClampDerivative(out[q]);
              j(i, i) = ea;
              for (size_t p = 0; p < pass.size(); ++p) {
                j(i, pass[p]) = x[i] * ea * da * dout(q, p) + dout(n + q, p);
              }
            }
            return j;
          },
          [&](const Autoregressive& a) {
            const Vec in = ArInput(a, x, context);
            const Vec out = a.conditioner.Forward(in);
            const Matrix dout = a.conditioner.Jacobian(in, d);
            Matrix j(d, d);
            for (size_t i = 0; i < d; ++i) {
              const double ea = std::exp(SoftClamp(out[i]));
              const double da = SoftClampDerivative(out[i]);
              for (size_t k = 0; k < d; ++k) {
                j(i, k) = x[i] * ea * da * dout(i, k) + dout(d + i, k);
              }
              j(i, i) += ea;
            }
            return j;
          },
          [&](const SigmoidSquash&) {
            Vec diag(d);
            for (size_t i = 0; i < d; ++i) diag[i] = Sigmoid(x[i]) * Sigmoid(-x[i]);
            return Matrix::Diagonal(diag);
          }},
      layer);
}

// --- FlowModel ---------------------------------------------------------------

FlowModel::FlowModel(size_t dim, std::vector<FlowLayer> layers,
                     size_t context_dim)
    : dim_(dim), context_dim_(context_dim), layers_(std::move(layers)) {
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (LayerDim(layers_[l]) != dim_) {
      Fail(ErrorCode::kDimensionMismatch,
           "layer " + std::to_string(l) + " has dimension " +
               std::to_string(LayerDim(layers_[l])) + ", model has " +
               std::to_string(dim_));
    }
    const size_t ctx = LayerContextDim(layers_[l]);
    if (ctx != 0 && ctx != context_dim_) {
      Fail(ErrorCode::kDimensionMismatch,
           "layer " + std::to_string(l) + " context dimension mismatch");
    }
  }
}

void FlowModel::CheckInput(std::span<const double> v,
                           std::span<const double> context) const {
  CheckDim(v, dim_, "model input");
  CheckContext(context_dim_, context);
}

Vec FlowModel::Forward(std::span<const double> x,
                       std::span<const double> context) const {
  CheckInput(x, context);
  Vec cur(x.begin(), x.end());
  for (const auto& layer : layers_) cur = lbb::Forward(layer, cur, context);
  return cur;
}

Vec FlowModel::Inverse(std::span<const double> z,
                       std::span<const double> context) const {
  CheckInput(z, context);
  Vec cur(z.begin(), z.end());
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    cur = lbb::Inverse(*it, cur, context);
  }
  return cur;
}

Vec FlowModel::ForwardWithLogDet(std::span<const double> x, double& log_det,
                                 std::span<const double> context) const {
  CheckInput(x, context);
  Vec cur(x.begin(), x.end());
  for (const auto& layer : layers_) {
    log_det += LogAbsDet(layer, cur, context);
    cur = lbb::Forward(layer, cur, context);
  }
  return cur;
}

Matrix FlowModel::Jacobian(std::span<const double> x,
                           std::span<const double> context) const {
  CheckInput(x, context);
  Matrix j = Matrix::Identity(dim_);
  Vec cur(x.begin(), x.end());
  for (const auto& layer : layers_) {
    j = lbb::Jacobian(layer, cur, context) * j;
    cur = lbb::Forward(layer, cur, context);
  }
  return j;
}

double FlowModel::LogDensity(std::span<const double> x,
                             std::span<const double> context) const {
  double log_det = 0.0;
  const Vec z = ForwardWithLogDet(x, log_det, context);
  return StandardNormalLogDensity(z) + log_det;
}

double FlowModel::NegLogDensityBits(std::span<const double> x,
                                    std::span<const double> context) const {
  return -LogDensity(x, context) / std::numbers::ln2;
}

double StandardNormalLogDensity(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  return -0.5 * sq -
         0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace lbb
