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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lbb/random.h"
#include "lbb/toy.h"
#include "test_util.h"

namespace lbb {
namespace {

Vec RandomVec(size_t d, Xoshiro256& rng, double scale = 1.0) {
  Vec v(d);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

struct Case {
  std::string name;
  FlowModel model;
};

// Small models covering every layer type, with and without context.
std::vector<Case> Models() {
  ToyFlowOptions ctx;
  ctx.context_dim = 3;
  return {
      {"realnvp", ToyRealNvp(8, 1)},
      {"realnvp_context", ToyRealNvp(8, 2, ctx)},
      {"autoregressive", ToyAutoregressive(5, 3)},
      {"byte", ToyByteModel(4, 4, {.spread = 4.0, .couplings = 2, .squeeze = 4.0})},
      {"dequantizer", ToyDequantizer(4, 5)},
  };
}

// Inputs inside each layer's domain: SigmoidSquash inputs are unbounded but
// its inverse needs (0, 1), which Forward guarantees.
Vec LayerInput(const FlowModel& model, size_t layer, Xoshiro256& rng,
               std::span<const double> context) {
  Vec x = RandomVec(model.dim(), rng, 0.7);
  if (TagOf(model.layers()[0]) == LayerTag::kActNorm &&
      std::get<ActNorm>(model.layers()[0]).bias[0] < -1.0) {
    for (double& v : x) v = 128.0 + 4.0 * v;
  }
  for (size_t l = 0; l < layer; ++l) x = Forward(model.layers()[l], x, context);
  return x;
}

Matrix FiniteDifferenceJacobian(const FlowLayer& layer, const Vec& x,
                                std::span<const double> context, double h) {
  const size_t d = x.size();
  Matrix j(d, d);
  for (size_t c = 0; c < d; ++c) {
    Vec lo = x, hi = x;
    lo[c] -= h;
    hi[c] += h;
    const Vec zl = Forward(layer, lo, context), zh = Forward(layer, hi, context);
    for (size_t r = 0; r < d; ++r) j(r, c) = (zh[r] - zl[r]) / (2 * h);
  }
  return j;
}

TEST(Layers, ActNormIdentity) {
  const FlowLayer layer = ActNorm{{1, 1, 1}, {0, 0, 0}};
  const Vec x = {0.5, -2.0, 3.25};
  EXPECT_EQ(Forward(layer, x), x);
  EXPECT_EQ(Inverse(layer, x), x);
  EXPECT_EQ(LogAbsDet(layer, x), 0.0);
}

TEST(Layers, ActNormJacobianIsDiagonal) {
  const FlowLayer layer = ActNorm{{2, 3}, {1, -1}};
  EXPECT_EQ(Jacobian(layer, Vec{0.1, 0.2}), Matrix(2, 2, {2, 0, 0, 3}));
  EXPECT_NEAR(LogAbsDet(layer, Vec{0.1, 0.2}), std::log(6.0), 1e-15);
}

TEST(Layers, DenseLinearExample) {
  const FlowLayer layer = DenseLinear(2, Matrix(2, 2, {2, 0, 1, 1}));
  EXPECT_EQ(Forward(layer, Vec{1, 1}), (Vec{2, 2}));
  EXPECT_EQ(Inverse(layer, Vec{2, 2}), (Vec{1, 1}));
  EXPECT_NEAR(LogAbsDet(layer, Vec{1, 1}), std::log(2.0), 1e-15);
}

TEST(Layers, DenseLinearAppliesBlockwise) {
  const FlowLayer layer = DenseLinear(4, Matrix(2, 2, {2, 0, 1, 1}));
  EXPECT_EQ(Forward(layer, Vec{1, 1, 1, 2}), (Vec{2, 2, 2, 3}));
  EXPECT_NEAR(LogAbsDet(layer, Vec(4, 0.0)), 2 * std::log(2.0), 1e-15);
}

TEST(Layers, DenseLinearRejectsSingularWeights) {
  EXPECT_LBB_ERROR(DenseLinear(2, Matrix(2, 2, {1, 2, 2, 4})),
                   ErrorCode::kNonInvertible);
  EXPECT_LBB_ERROR(DenseLinear(3, Matrix::Identity(2)),
                   ErrorCode::kDimensionMismatch);
}

TEST(Layers, SigmoidSquashAtZero) {
  const FlowLayer layer = SigmoidSquash{1};
  const auto [z, dz] = CoordForward(layer, 0, 0.0, Vec{0.0});
  EXPECT_EQ(z, 0.5);
  EXPECT_EQ(dz, 0.25);
  EXPECT_EQ(CoordInverse(layer, 0, 0.5, Vec{0.0}), 0.0);
}

TEST(Layers, DenseLinearHasNoCoordinateForm) {
  const FlowLayer layer = DenseLinear(2, Matrix::Identity(2));
  EXPECT_LBB_ERROR(CoordForward(layer, 0, 0.0, Vec{0, 0}),
                   ErrorCode::kUnsupportedLayer);
}

TEST(Layers, CouplingPassesHalfThrough) {
  const FlowModel model = ToyRealNvp(8, 9);
  Xoshiro256 rng(1);
  for (const FlowLayer& layer : model.layers()) {
    if (TagOf(layer) != LayerTag::kAffineCoupling) continue;
    const auto& c = std::get<AffineCoupling>(layer);
    const Vec x = RandomVec(8, rng);
    const Vec z = Forward(layer, x);
    const Matrix j = Jacobian(layer, x);
    for (size_t p : c.PassIndices()) {
      EXPECT_EQ(z[p], x[p]);
      for (size_t q = 0; q < 8; ++q) EXPECT_EQ(j(p, q), p == q ? 1.0 : 0.0);
    }
  }
}

TEST(Layers, InverseUndoesForward) {
  Xoshiro256 rng(11);
  for (const Case& c : Models()) {
    const Vec ctx = RandomVec(c.model.context_dim(), rng);
    for (size_t l = 0; l < c.model.layers().size(); ++l) {
      const FlowLayer& layer = c.model.layers()[l];
      for (int trial = 0; trial < 20; ++trial) {
        const Vec x = LayerInput(c.model, l, rng, ctx);
        const Vec back = Inverse(layer, Forward(layer, x, ctx), ctx);
        for (size_t i = 0; i < x.size(); ++i) {
          ASSERT_NEAR(back[i], x[i], 1e-10 * (1 + std::abs(x[i])))
              << c.name << " layer " << l;
        }
      }
    }
  }
}

TEST(Layers, JacobianMatchesFiniteDifferences) {
  Xoshiro256 rng(13);
  for (const Case& c : Models()) {
    const Vec ctx = RandomVec(c.model.context_dim(), rng);
    for (size_t l = 0; l < c.model.layers().size(); ++l) {
      const FlowLayer& layer = c.model.layers()[l];
      for (int trial = 0; trial < 5; ++trial) {
        const Vec x = LayerInput(c.model, l, rng, ctx);
        const Matrix j = Jacobian(layer, x, ctx);
        const Matrix fd = FiniteDifferenceJacobian(layer, x, ctx, 1e-5);
        for (size_t r = 0; r < x.size(); ++r)
          for (size_t q = 0; q < x.size(); ++q)
            ASSERT_NEAR(j(r, q), fd(r, q), 1e-5 * (1 + std::abs(j(r, q))))
                << c.name << " layer " << l << " entry " << r << "," << q;
      }
    }
  }
}

TEST(Layers, LogAbsDetMatchesDenseJacobian) {
  Xoshiro256 rng(17);
  for (const Case& c : Models()) {
    const Vec ctx = RandomVec(c.model.context_dim(), rng);
    for (size_t l = 0; l < c.model.layers().size(); ++l) {
      const FlowLayer& layer = c.model.layers()[l];
      for (int trial = 0; trial < 100; ++trial) {
        const Vec x = LayerInput(c.model, l, rng, ctx);
        const SignLogDet dense = LogDeterminant(Jacobian(layer, x, ctx));
        ASSERT_NEAR(LogAbsDet(layer, x, ctx), dense.log_abs, 1e-8)
            << c.name << " layer " << l;
      }
    }
  }
}

TEST(Layers, CoordinateMapsAgreeWithJacobian) {
  Xoshiro256 rng(19);
  for (const Case& c : Models()) {
    const Vec ctx = RandomVec(c.model.context_dim(), rng);
    for (size_t l = 0; l < c.model.layers().size(); ++l) {
      const FlowLayer& layer = c.model.layers()[l];
      if (TagOf(layer) == LayerTag::kDenseLinear) continue;
      const Vec x = LayerInput(c.model, l, rng, ctx);
      const Vec z = Forward(layer, x, ctx);
      const Matrix j = Jacobian(layer, x, ctx);
      for (size_t i = 0; i < x.size(); ++i) {
        const auto [zi, dzi] = CoordForward(layer, i, x[i], x, ctx);
        EXPECT_NEAR(zi, z[i], 1e-12 * (1 + std::abs(z[i])));
        EXPECT_NEAR(dzi, j(i, i), 1e-12 * (1 + std::abs(dzi)));
        const double h = 1e-6;
        const double fd = (CoordForward(layer, i, x[i] + h, x, ctx).first -
                           CoordForward(layer, i, x[i] - h, x, ctx).first) /
                          (2 * h);
        EXPECT_NEAR(dzi, fd, 1e-6 * (1 + std::abs(dzi))) << c.name << " " << l;
        EXPECT_NEAR(CoordInverse(layer, i, zi, x, ctx), x[i],
                    1e-10 * (1 + std::abs(x[i])));
      }
    }
  }
}

TEST(ScalarMap, InvertedComposesToIdentity) {
  for (const ScalarMap m : {ScalarMap{ScalarMap::Kind::kAffine, 2.5, -1.0},
                            ScalarMap{ScalarMap::Kind::kSigmoid, 1.0, 0.0}}) {
    const ScalarMap inv = m.Inverted();
    for (double x : {-2.0, -0.1, 0.0, 0.7, 3.0}) {
      EXPECT_NEAR(inv.Forward(m.Forward(x)), x, 1e-12);
      EXPECT_NEAR(m.Inverse(m.Forward(x)), x, 1e-12);
      EXPECT_NEAR(m.Derivative(x) * inv.Derivative(m.Forward(x)), 1.0, 1e-12);
    }
  }
}

TEST(Mlp, JacobianMatchesFiniteDifferences) {
  Xoshiro256 rng(23);
  const Mlp mlp = RandomMlp(5, 3, rng, 0.5, 16);
  const Vec x = RandomVec(5, rng);
  const Matrix j = mlp.Jacobian(x, 5);
  for (size_t c = 0; c < 5; ++c) {
    Vec lo = x, hi = x;
    lo[c] -= 1e-6;
    hi[c] += 1e-6;
    const Vec a = mlp.Forward(lo), b = mlp.Forward(hi);
    for (size_t r = 0; r < 3; ++r) EXPECT_NEAR(j(r, c), (b[r] - a[r]) / 2e-6, 1e-7);
  }
}

TEST(FlowModel, InverseUndoesForward) {
  Xoshiro256 rng(29);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const FlowModel model = ToyRealNvp(16, seed);
    const Vec x = RandomVec(16, rng);
    const Vec back = model.Inverse(model.Forward(x));
    for (size_t i = 0; i < 16; ++i) EXPECT_NEAR(back[i], x[i], 1e-10 * (1 + std::abs(x[i])));
  }
}

TEST(FlowModel, JacobianIsTheChainRuleProduct) {
  const FlowModel model = ToyRealNvp(4, 31, {.couplings = 2, .block = 2});
  Xoshiro256 rng(31);
  Vec x = RandomVec(4, rng);
  const Matrix full = model.Jacobian(x);
  Matrix product = Matrix::Identity(4);
  for (const FlowLayer& layer : model.layers()) {
    product = Jacobian(layer, x) * product;
    x = Forward(layer, x);
  }
  for (size_t i = 0; i < 16; ++i) EXPECT_NEAR(full.data()[i], product.data()[i], 1e-12);
}

TEST(FlowModel, DensityIsPriorPlusLogDets) {
  const FlowModel model = ToyRealNvp(8, 37);
  Xoshiro256 rng(37);
  const Vec x = RandomVec(8, rng);
  Vec z = x;
  double log_det = 0.0;
  for (const FlowLayer& layer : model.layers()) {
    log_det += LogAbsDet(layer, z);
    z = Forward(layer, z);
  }
  double model_log_det = 0.0;
  EXPECT_EQ(model.ForwardWithLogDet(x, model_log_det), z);
  EXPECT_NEAR(model_log_det, log_det, 1e-12);
  EXPECT_NEAR(model.LogDensity(x), StandardNormalLogDensity(z) + log_det, 1e-12);
  EXPECT_NEAR(model.NegLogDensityBits(x), -model.LogDensity(x) / std::numbers::ln2,
              1e-12);
}

TEST(FlowModel, IdentityModelDensityAtOrigin) {
  const FlowModel model(2, {});
  EXPECT_NEAR(model.NegLogDensityBits(Vec{0, 0}), std::log2(2 * std::numbers::pi),
              1e-14);
}

TEST(FlowModel, AppendingALayerAndItsInverseChangesNothing) {
  const FlowModel base = ToyRealNvp(4, 41);
  std::vector<FlowLayer> layers = base.layers();
  layers.emplace_back(ActNorm{{2, 0.5, -3, 1.5}, {0.1, 0.2, 0.3, 0.4}});
  layers.emplace_back(ActNorm{{0.5, 2, -1.0 / 3, 1 / 1.5},
                              {-0.05, -0.4, 0.1, -0.4 / 1.5}});
  const FlowModel extended(4, layers);
  Xoshiro256 rng(41);
  for (int i = 0; i < 10; ++i) {
    const Vec x = RandomVec(4, rng);
    EXPECT_NEAR(extended.LogDensity(x), base.LogDensity(x), 1e-12);
  }
}

TEST(FlowModel, DensityIntegratesToOne) {
  ToyFlowOptions options;
  options.block = 0;
  options.out_scale = 1.0;
  const FlowModel model = ToyRealNvp(2, 43, options);
  Xoshiro256 rng(43);
  double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
  for (int i = 0; i < 20000; ++i) {
    const Vec x = SampleFlow(model, rng);
    for (int c = 0; c < 2; ++c) {
      lo[c] = std::min(lo[c], x[c]);
      hi[c] = std::max(hi[c], x[c]);
    }
  }
  constexpr int kGrid = 300;
  double h[2], start[2];
  for (int c = 0; c < 2; ++c) {
    const double pad = 0.5 * (hi[c] - lo[c]);
    start[c] = lo[c] - pad;
    h[c] = (hi[c] - lo[c] + 2 * pad) / kGrid;
  }
  double total = 0.0;
  for (int a = 0; a < kGrid; ++a) {
    for (int b = 0; b < kGrid; ++b) {
      const Vec x = {start[0] + (a + 0.5) * h[0], start[1] + (b + 0.5) * h[1]};
      total += std::exp(model.LogDensity(x));
    }
  }
  EXPECT_NEAR(total * h[0] * h[1], 1.0, 0.01);
}

TEST(FlowModel, DimensionChecks) {
  EXPECT_LBB_ERROR(FlowModel(3, {ActNorm{{1, 1}, {0, 0}}}),
                   ErrorCode::kDimensionMismatch);
  const FlowModel model = ToyRealNvp(4, 1);
  EXPECT_LBB_ERROR(model.Forward(Vec{1, 2, 3}), ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace lbb
