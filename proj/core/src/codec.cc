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

#include "lbb/codec.h"

#include <cmath>
#include <string>

#include "lbb/ar.h"
#include "lbb/error.h"
#include "lbb/linalg.h"
#include "lbb/random.h"

namespace lbb {

namespace {

enum class Side { kDraw, kCode };

// Window of each variable of a step. Compression draws z̄ and encodes x̄;
// a sampling chain draws x̄ and encodes z̄.
struct Sides {
  Side x = Side::kCode;
  Side z = Side::kDraw;
};

Sides SidesOf(const CodingStep& step) {
  return step.sampling ? Sides{Side::kDraw, Side::kCode} : Sides{};
}

// Bins of a coordinate known to lie in (0, 1) are clipped to [0, 2^k).
GaussianBins Bins(const CodecParams& p, Side side, double mean, double stddev,
                  bool unit_interval) {
  const GaussianBinSpec spec =
      side == Side::kDraw ? p.DrawSpec(mean, stddev) : p.CodeSpec(mean, stddev);
  // Encoded values get an escape: grid rounding can push them past any
  // window once σ2^k is small.
  const bool escape = side == Side::kCode;
  if (!unit_interval) {
    return GaussianBins(spec, GaussianBins::kNoMin, GaussianBins::kNoMax, escape);
  }
  return GaussianBins(spec, 0, (int64_t{1} << p.k()) - 1, escape);
}

bool XInUnit(const ScalarMap& m) { return m.kind == ScalarMap::Kind::kLogit; }
bool ZInUnit(const ScalarMap& m) { return m.kind == ScalarMap::Kind::kSigmoid; }

int64_t EncodeCoord(const ScalarMap& m, int64_t x, const CodecParams& p,
                    AnsStream& stream, Sides sides) {
  const double xv = BinCenter(x, p.k());
  const int64_t z =
      Bins(p, sides.z, m.Forward(xv), p.sigma * std::fabs(m.Derivative(xv)), ZInUnit(m))
          .Decode(stream);
  Bins(p, sides.x, m.Inverse(BinCenter(z, p.k())), p.sigma, XInUnit(m))
      .Encode(stream, x);
  return z;
}

int64_t DecodeCoord(const ScalarMap& m, int64_t z, const CodecParams& p,
                    AnsStream& stream, Sides sides) {
  const int64_t x =
      Bins(p, sides.x, m.Inverse(BinCenter(z, p.k())), p.sigma, XInUnit(m)).Decode(stream);
  const double xv = BinCenter(x, p.k());
  Bins(p, sides.z, m.Forward(xv), p.sigma * std::fabs(m.Derivative(xv)), ZInUnit(m))
      .Encode(stream, z);
  return x;
}

Vec Values(const Indices& n, int k) {
  Vec v(n.size());
  for (size_t i = 0; i < n.size(); ++i) v[i] = BinCenter(n[i], k);
  return v;
}

std::vector<ScalarMap> StepMaps(const CodingStep& step,
                                std::span<const double> v,
                                std::span<const double> context) {
  auto maps = ElementwiseMaps(*step.layer, v, context);
  if (step.inverted) {
    for (auto& m : maps) m = m.Inverted();
  }
  return maps;
}

// Map of coordinate i of an autoregressive layer. Only x_<i is visible to
// the conditioner, so later entries are zeroed on both sides of the channel.
ScalarMap ArMap(const FlowLayer& layer, size_t i, Vec& prefix,
                std::span<const double> context) {
  return ElementwiseMaps(layer, prefix, context)[i];
}

// z̄ ~ N(f(x̄), σ²JJᵀ) drawn through the autoregressive factorization of J,
// then x̄ ~ N(f⁻¹(z̄), σ²I).
template <class Fwd, class Inv, class ArAt>
Indices BlackboxEncodeBlock(const Indices& x, Fwd&& f, Inv&& f_inv,
                            ArAt&& ar_at, const CodecParams& p,
                            AnsStream& stream, Sides sides) {
  const size_t n = x.size();
  const Vec xv = Values(x, p.k());
  const Vec mu = f(xv);
  const ArDecomposition ar = ar_at(xv);
  Indices z(n);
  Vec residual(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double mean = mu[i] + ar.ConditionalMean(i, residual);
    z[i] = Bins(p, sides.z, mean, p.sigma * ar.ConditionalStddev(i), false).Decode(stream);
    residual[i] = BinCenter(z[i], p.k()) - mu[i];
  }
  const Vec x_mean = f_inv(Values(z, p.k()));
  for (size_t i = n; i-- > 0;) {
    Bins(p, sides.x, x_mean[i], p.sigma, false).Encode(stream, x[i]);
  }
  return z;
}

template <class Fwd, class Inv, class ArAt>
Indices BlackboxDecodeBlock(const Indices& z, Fwd&& f, Inv&& f_inv,
                            ArAt&& ar_at, const CodecParams& p,
                            AnsStream& stream, Sides sides) {
  const size_t n = z.size();
  const Vec zv = Values(z, p.k());
  const Vec x_mean = f_inv(zv);
  Indices x(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = Bins(p, sides.x, x_mean[i], p.sigma, false).Decode(stream);
  }
  const Vec xv = Values(x, p.k());
  const Vec mu = f(xv);
  const ArDecomposition ar = ar_at(xv);
  Vec residual(n);
  for (size_t i = 0; i < n; ++i) residual[i] = zv[i] - mu[i];
  for (size_t i = n; i-- > 0;) {
    const double mean = mu[i] + ar.ConditionalMean(i, residual);
    Bins(p, sides.z, mean, p.sigma * ar.ConditionalStddev(i), false).Encode(stream, z[i]);
  }
  return x;
}

template <class BlockCoder>
Indices CodeDenseBlocks(const CodingStep& step, const Indices& in,
                        bool descending, BlockCoder&& code) {
  const auto& dense = std::get<DenseLinear>(*step.layer);
  const Matrix& fwd = step.inverted ? dense.inverse() : dense.weight();
  const Matrix& inv = step.inverted ? dense.weight() : dense.inverse();
  const ArDecomposition& ar = step.inverted ? dense.inverse_ar() : dense.forward_ar();
  const size_t b = dense.block();
  Indices out(in.size());
  const size_t n_blocks = dense.num_blocks();
  for (size_t q = 0; q < n_blocks; ++q) {
    const size_t blk = descending ? n_blocks - 1 - q : q;
    const Indices part(in.begin() + blk * b, in.begin() + (blk + 1) * b);
    const Indices coded = code(
        part, [&](std::span<const double> v) { return fwd * v; },
        [&](std::span<const double> v) { return inv * v; },
        [&](std::span<const double>) -> const ArDecomposition& { return ar; });
    std::copy(coded.begin(), coded.end(), out.begin() + blk * b);
  }
  return out;
}

void CheckIndices(const Indices& v, size_t dim, const char* what) {
  if (v.size() != dim) {
    Fail(ErrorCode::kDimensionMismatch,
         std::string(what) + " has " + std::to_string(v.size()) +
             " coordinates, expected " + std::to_string(dim));
  }
}

void CheckPoint(const GridPoint& x, size_t dim, const CodecParams& p) {
  if (x.k != p.k_x) {
    Fail(ErrorCode::kInvalidArgument,
         "grid point precision " + std::to_string(x.k) +
             " does not match k_x " + std::to_string(p.k_x));
  }
  CheckIndices(x.indices, dim, "grid point");
}

}  // namespace

void CodecParams::Validate() const {
  if (k_x != k_z) {
    Fail(ErrorCode::kInvalidArgument, "k_x and k_z must be equal");
  }
  if (k_x < 1 || k_x > kMaxGridPrecision) {
    Fail(ErrorCode::kInvalidArgument,
         "k must be in [1, " + std::to_string(kMaxGridPrecision) + "]");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    Fail(ErrorCode::kInvalidArgument, "sigma must be positive and finite");
  }
  if (r < 4 || r > kMaxPrecision) {
    Fail(ErrorCode::kInvalidArgument, "table precision must be in [4, 32]");
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    Fail(ErrorCode::kInvalidArgument, "support must be positive and finite");
  }
}

bool CodecParams::WellConditioned() const {
  return std::ldexp(sigma, k_x) >= 4.0;
}

CodingChain CodingChain::Forward(const FlowModel& model) {
  CodingChain chain;
  chain.dim_ = model.dim();
  chain.context_dim_ = model.context_dim();
  for (const auto& layer : model.layers()) chain.steps_.push_back({&layer, false});
  return chain;
}

CodingChain CodingChain::Sampling(const FlowModel& model) {
  CodingChain chain;
  chain.dim_ = model.dim();
  chain.context_dim_ = model.context_dim();
  const auto& layers = model.layers();
  for (size_t i = layers.size(); i-- > 0;) chain.steps_.push_back({&layers[i], true, true});
  return chain;
}

Vec StepForward(const CodingStep& step, std::span<const double> x,
                std::span<const double> context) {
  return step.inverted ? Inverse(*step.layer, x, context)
                       : Forward(*step.layer, x, context);
}

Vec StepInverse(const CodingStep& step, std::span<const double> z,
                std::span<const double> context) {
  return step.inverted ? Forward(*step.layer, z, context)
                       : Inverse(*step.layer, z, context);
}

Indices EncodeStep(const CodingStep& step, const Indices& x,
                   std::span<const double> context, const CodecParams& p,
                   AnsStream& stream) {
  const FlowLayer& layer = *step.layer;
  const size_t d = LayerDim(layer);
  CheckIndices(x, d, "layer input");
  if (std::holds_alternative<DenseLinear>(layer)) {
    return CodeDenseBlocks(step, x, true, [&](const Indices& part, auto f, auto f_inv,
                                        auto ar_at) {
      return BlackboxEncodeBlock(part, f, f_inv, ar_at, p, stream, SidesOf(step));
    });
  }
  const Vec xv = Values(x, p.k());
  Indices z = x;
  if (std::holds_alternative<Autoregressive>(layer)) {
    if (step.inverted) {
      Fail(ErrorCode::kUnsupportedLayer,
           "inverse autoregressive steps are not codable");
    }
    Vec prefix(d, 0.0);
    for (size_t i = d; i-- > 0;) {
      std::copy(xv.begin(), xv.begin() + i, prefix.begin());
      std::fill(prefix.begin() + i, prefix.end(), 0.0);
      z[i] = EncodeCoord(ArMap(layer, i, prefix, context), x[i], p, stream,
                         SidesOf(step));
    }
    return z;
  }
  const auto maps = StepMaps(step, xv, context);
  const auto pass = PassThroughMask(layer);
  for (size_t i = d; i-- > 0;) {
    if (!pass[i]) z[i] = EncodeCoord(maps[i], x[i], p, stream, SidesOf(step));
  }
  return z;
}

Indices DecodeStep(const CodingStep& step, const Indices& z,
                   std::span<const double> context, const CodecParams& p,
                   AnsStream& stream) {
  const FlowLayer& layer = *step.layer;
  const size_t d = LayerDim(layer);
  CheckIndices(z, d, "layer output");
  if (std::holds_alternative<DenseLinear>(layer)) {
    return CodeDenseBlocks(step, z, false, [&](const Indices& part, auto f, auto f_inv,
                                        auto ar_at) {
      return BlackboxDecodeBlock(part, f, f_inv, ar_at, p, stream, SidesOf(step));
    });
  }
  Indices x = z;
  if (std::holds_alternative<Autoregressive>(layer)) {
    if (step.inverted) {
      Fail(ErrorCode::kUnsupportedLayer,
           "inverse autoregressive steps are not codable");
    }
    Vec prefix(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
      x[i] = DecodeCoord(ArMap(layer, i, prefix, context), z[i], p, stream,
                         SidesOf(step));
      prefix[i] = BinCenter(x[i], p.k());
    }
    return x;
  }
  // Pass-through coordinates of z̄ equal those of x̄, so the maps match the
  // sender's.
  const auto maps = StepMaps(step, Values(z, p.k()), context);
  const auto pass = PassThroughMask(layer);
  for (size_t i = 0; i < d; ++i) {
    if (!pass[i]) x[i] = DecodeCoord(maps[i], z[i], p, stream, SidesOf(step));
  }
  return x;
}

GridPoint LayerEncode(const FlowLayer& layer, const GridPoint& x,
                      const CodecParams& params, AnsStream& stream,
                      std::span<const double> context) {
  params.Validate();
  CheckPoint(x, LayerDim(layer), params);
  return {EncodeStep({&layer, false}, x.indices, context, params, stream),
          params.k_z};
}

GridPoint LayerDecode(const FlowLayer& layer, const GridPoint& z,
                      const CodecParams& params, AnsStream& stream,
                      std::span<const double> context) {
  params.Validate();
  CheckPoint(z, LayerDim(layer), params);
  return {DecodeStep({&layer, false}, z.indices, context, params, stream),
          params.k_x};
}

GaussianBins Prior(const CodecParams& params, bool drawn) {
  return drawn ? GaussianBins(params.DrawSpec(0.0, 1.0))
               : GaussianBins(params.CodeSpec(0.0, 1.0), GaussianBins::kNoMin,
                              GaussianBins::kNoMax, true);
}

void EncodePrior(const Indices& z, const CodecParams& params, AnsStream& stream,
                 bool drawn) {
  const GaussianBins prior = Prior(params, drawn);
  for (size_t i = z.size(); i-- > 0;) prior.Encode(stream, z[i]);
}

Indices DecodePrior(size_t dim, const CodecParams& params, AnsStream& stream,
                    bool drawn) {
  const GaussianBins prior = Prior(params, drawn);
  Indices z(dim);
  for (size_t i = 0; i < dim; ++i) z[i] = prior.Decode(stream);
  return z;
}

Indices EncodeChain(const CodingChain& chain, const Indices& x,
                    std::span<const double> context, const CodecParams& params,
                    AnsStream& stream) {
  Indices y = x;
  for (const auto& step : chain.steps()) {
    y = EncodeStep(step, y, context, params, stream);
  }
  return y;
}

Indices DecodeChain(const CodingChain& chain, const Indices& z,
                    std::span<const double> context, const CodecParams& params,
                    AnsStream& stream) {
  Indices y = z;
  const auto steps = chain.steps();
  for (size_t i = steps.size(); i-- > 0;) {
    y = DecodeStep(steps[i], y, context, params, stream);
  }
  return y;
}

void CompositionalEncode(const FlowModel& model, const GridPoint& x,
                         const CodecParams& params, AnsStream& stream,
                         std::span<const double> context) {
  params.Validate();
  CheckPoint(x, model.dim(), params);
  const CodingChain chain = CodingChain::Forward(model);
  EncodePrior(EncodeChain(chain, x.indices, context, params, stream), params,
              stream);
}

GridPoint CompositionalDecode(const FlowModel& model,
                              const CodecParams& params, AnsStream& stream,
                              std::span<const double> context) {
  params.Validate();
  const CodingChain chain = CodingChain::Forward(model);
  const Indices z = DecodePrior(model.dim(), params, stream);
  return {DecodeChain(chain, z, context, params, stream), params.k_x};
}

void BlackboxEncode(const FlowModel& model, const GridPoint& x,
                    const CodecParams& params, AnsStream& stream,
                    std::span<const double> context) {
  params.Validate();
  CheckPoint(x, model.dim(), params);
  const Indices z = BlackboxEncodeBlock(
      x.indices, [&](std::span<const double> v) { return model.Forward(v, context); },
      [&](std::span<const double> v) { return model.Inverse(v, context); },
      [&](std::span<const double> v) {
        return GaussianToAr(model.Jacobian(v, context));
      },
      params, stream, Sides{});
  EncodePrior(z, params, stream);
}

GridPoint BlackboxDecode(const FlowModel& model, const CodecParams& params,
                         AnsStream& stream, std::span<const double> context) {
  params.Validate();
  const Indices z = DecodePrior(model.dim(), params, stream);
  Indices x = BlackboxDecodeBlock(
      z, [&](std::span<const double> v) { return model.Forward(v, context); },
      [&](std::span<const double> v) { return model.Inverse(v, context); },
      [&](std::span<const double> v) {
        return GaussianToAr(model.Jacobian(v, context));
      },
      params, stream, Sides{});
  return {std::move(x), params.k_x};
}

double TheoreticalBits(const FlowModel& model, const GridPoint& x,
                       std::span<const double> context) {
  return model.NegLogDensityBits(x.values(), context) +
         static_cast<double>(x.k) * static_cast<double>(x.size());
}

LogdetGap EstimateLogdetGap(const FlowModel& model, std::span<const double> x,
                            double sigma, size_t n_samples, uint64_t seed) {
  const size_t d = model.dim();
  const Matrix jac = model.Jacobian(x);
  const Vec fx = model.Forward(x);
  LogdetGap out;
  out.neg_log_det = -LogDeterminant(jac).log_abs;

  const size_t pairs = std::max<size_t>(1, n_samples / 2);
  Xoshiro256 rng(seed);
  Vec eps(d), z(d);
  double mean = 0.0, m2 = 0.0;
  for (size_t s = 0; s < pairs; ++s) {
    for (double& e : eps) e = rng.Normal();
    const Vec j_eps = jac * eps;
    double pair = 0.0;
    for (double sign : {1.0, -1.0}) {
      for (size_t i = 0; i < d; ++i) z[i] = fx[i] + sign * sigma * j_eps[i];
      const Vec xr = model.Inverse(z);
      double e = 0.0;
      for (size_t i = 0; i < d; ++i) {
        const double delta = (xr[i] - x[i]) / sigma;
        const double se = sign * eps[i];
        e += 0.5 * (delta - se) * (delta + se);
      }
      pair += 0.5 * e;
    }
    const double step = pair - mean;
    mean += step / static_cast<double>(s + 1);
    m2 += step * (pair - mean);
  }
  out.excess = mean;
  out.estimate = out.neg_log_det + mean;
  out.excess_stderr =
      pairs > 1 ? std::sqrt(m2 / static_cast<double>(pairs - 1) /
                            static_cast<double>(pairs))
                : 0.0;
  return out;
}

}  // namespace lbb
