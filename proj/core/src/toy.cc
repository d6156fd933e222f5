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

#include "lbb/toy.h"

#include <algorithm>
#include <cmath>

#include "lbb/linalg.h"

namespace lbb {

namespace {

Matrix Gaussian(size_t rows, size_t cols, double scale, Xoshiro256& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.Normal();
  return m;
}

ActNorm RandomActNorm(size_t dim, Xoshiro256& rng) {
  ActNorm a{Vec(dim), Vec(dim)};
  for (size_t i = 0; i < dim; ++i) {
    a.scale[i] = std::exp(0.2 * rng.Normal());
    a.bias[i] = 0.1 * rng.Normal();
  }
  return a;
}

DenseLinear RandomDense(size_t dim, size_t block, Xoshiro256& rng) {
  for (;;) {
    Matrix w = Gaussian(block, block, 0.4 / std::sqrt(double(block)), rng);
    for (size_t i = 0; i < block; ++i) w(i, i) += 1.0;
    if (LogDeterminant(w).log_abs > -2.0) return DenseLinear(dim, std::move(w));
  }
}

std::vector<FlowLayer> CouplingStack(size_t dim, const ToyFlowOptions& o,
                                     Xoshiro256& rng) {
  std::vector<FlowLayer> layers;
  for (size_t c = 0; c < o.couplings; ++c) {
    AffineCoupling layer;
    layer.dim = dim;
    layer.flip = c % 2 == 1;
    layer.context_dim = o.context_dim;
    const size_t n_pass = layer.PassIndices().size();
    const size_t n_tr = layer.TransformedIndices().size();
    layer.conditioner = RandomMlp(n_pass + o.context_dim, 2 * n_tr, rng, o.out_scale,
                                  o.hidden);
    layers.emplace_back(std::move(layer));
  }
  return layers;
}

}  // namespace

Mlp RandomMlp(size_t in, size_t out, Xoshiro256& rng, double out_scale,
              size_t hidden) {
  Mlp mlp;
  const size_t sizes[] = {in, hidden, hidden, out};
  for (size_t l = 0; l < 3; ++l) {
    const size_t fan_in = std::max<size_t>(1, sizes[l]);
    const double scale = (l == 2 ? out_scale : 1.0) / std::sqrt(double(fan_in));
    Mlp::Dense dense{Gaussian(sizes[l + 1], sizes[l], scale, rng),
                     Vec(sizes[l + 1], 0.0)};
    for (double& b : dense.bias) b = 0.1 * rng.Normal() * (l == 2 ? out_scale : 1.0);
    mlp.layers.push_back(std::move(dense));
  }
  return mlp;
}

FlowModel ToyRealNvp(size_t dim, uint64_t seed, const ToyFlowOptions& options) {
  Xoshiro256 rng(seed);
  std::vector<FlowLayer> layers;
  layers.emplace_back(RandomActNorm(dim, rng));
  for (auto& l : CouplingStack(dim, options, rng)) layers.push_back(std::move(l));
  if (options.block > 0) layers.emplace_back(RandomDense(dim, options.block, rng));
  return FlowModel(dim, std::move(layers), options.context_dim);
}

FlowModel ToyAutoregressive(size_t dim, uint64_t seed, double out_scale) {
  Xoshiro256 rng(seed);
  std::vector<FlowLayer> layers;
  layers.emplace_back(RandomActNorm(dim, rng));
  Autoregressive ar;
  ar.dim = dim;
  ar.conditioner = RandomMlp(dim, 2 * dim, rng, out_scale);
  ApplyAutoregressiveMasks(ar.conditioner, dim);
  layers.emplace_back(std::move(ar));
  return FlowModel(dim, std::move(layers));
}

FlowModel ToyByteModel(size_t dim, uint64_t seed,
                       const ToyByteOptions& o) {
  Xoshiro256 rng(seed);
  std::vector<FlowLayer> layers;
  layers.emplace_back(ActNorm{Vec(dim, 1.0 / o.spread), Vec(dim, -128.0 / o.spread)});
  ToyFlowOptions options;
  options.couplings = dim > 1 ? o.couplings : 0;
  options.block = dim % 4 == 0 ? 4 : (dim % 2 == 0 ? 2 : 1);
  size_t n = 0;
  for (auto& l : CouplingStack(dim, options, rng)) {
    layers.push_back(std::move(l));
    if (o.squeeze != 1.0) {
      const double s = n++ % 2 == 0 ? 1.0 / o.squeeze : o.squeeze;
      layers.emplace_back(ActNorm{Vec(dim, s), Vec(dim, 0.0)});
    }
  }
  layers.emplace_back(RandomDense(dim, options.block, rng));
  return FlowModel(dim, std::move(layers));
}

FlowModel ToyDequantizer(size_t dim, uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<FlowLayer> layers;
  layers.emplace_back(RandomActNorm(dim, rng));
  ToyFlowOptions options;
  options.couplings = 2;
  options.context_dim = dim;
  options.out_scale = 0.5;
  for (auto& l : CouplingStack(dim, options, rng)) layers.push_back(std::move(l));
  layers.emplace_back(SigmoidSquash{dim});
  return FlowModel(dim, std::move(layers), dim);
}

Vec SampleFlow(const FlowModel& model, Xoshiro256& rng) {
  Vec eps(model.dim());
  for (double& e : eps) e = rng.Normal();
  return model.Inverse(eps);
}

std::vector<uint8_t> SampleBytes(const FlowModel& model, size_t n,
                                 uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<uint8_t> out;
  out.reserve(n * model.dim());
  for (size_t s = 0; s < n; ++s) {
    for (double v : SampleFlow(model, rng)) {
      out.push_back(static_cast<uint8_t>(std::clamp(std::floor(v), 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace lbb
