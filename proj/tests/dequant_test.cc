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


#include "lbb/dequant.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "lbb/io.h"
#include "lbb/random.h"
#include "lbb/toy.h"
#include "test_util.h"

namespace lbb {
namespace {

const std::filesystem::path kFixtures = LBB_FIXTURE_DIR;

CodecParams Params(uint64_t seed) {
  CodecParams p;
  p.k_x = p.k_z = 24;
  p.sigma = 0x1.0p-12;
  p.seed = seed;
  return p;
}

Indices Row(const Tensor& t, size_t i) {
  const size_t d = t.shape[1];
  return Indices(t.u8.begin() + i * d, t.u8.begin() + (i + 1) * d);
}

// -log2 of the probability mass of the unit cell [x, x + 1) by Simpson's rule.
double CellBits(const FlowModel& model, int64_t x) {
  constexpr int kIntervals = 2000;
  const double h = 1.0 / kIntervals;
  double sum = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double w = (i == 0 || i == kIntervals) ? 1 : (i % 2 ? 4 : 2);
    sum += w * std::exp(model.LogDensity(Vec{double(x) + i * h}));
  }
  return -std::log2(sum * h / 3);
}

TEST(Dequant, ContextIsScaledData) {
  const std::vector<int64_t> x = {0, 128, 255};
  EXPECT_EQ(DequantContext(x, 8), (Vec{0.0, 0.5, 255.0 / 256}));
}

TEST(Dequant, RoundTripsBothDequantizers) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const FlowModel flow = LoadWeights(kFixtures / "dequant8.lbbw");
  const Tensor data = LoadTensor(kFixtures / "byte8_data.lbbt");
  for (const Dequantizer& dq :
       {Dequantizer::Uniform(), Dequantizer::ConditionalFlow(flow)}) {
    for (size_t i = 0; i < 50; ++i) {
      const Indices x = Row(data, i);
      const CodecParams p = Params(i);
      AnsStream tx(p.seed);
      DequantEncode(x, 8, model, dq, p, tx);
      AnsStream rx = AnsStream::FromBytes(tx.Flush());
      EXPECT_EQ(DequantDecode(8, 8, model, dq, p, rx), x);
      EXPECT_TRUE(rx.MatchesReservoir(p.seed, 0));
    }
  }
}

TEST(Dequant, RejectsValuesBeyondTheBitDepth) {
  const FlowModel model = ToyByteModel(2, 1);
  AnsStream s;
  EXPECT_LBB_ERROR(DequantEncode(Indices{0, 256}, 8, model, Dequantizer::Uniform(),
                                 Params(0), s),
                   ErrorCode::kOutOfRange);
  EXPECT_LBB_ERROR(DequantEncode(Indices{-1, 3}, 8, model, Dequantizer::Uniform(),
                                 Params(0), s),
                   ErrorCode::kOutOfRange);
  EXPECT_LBB_ERROR(DequantEncode(Indices{0, 8}, 3, model, Dequantizer::Uniform(),
                                 Params(0), s),
                   ErrorCode::kOutOfRange);
}

TEST(Dequant, UniformNetBitsMatchTheBound) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const Tensor data = LoadTensor(kFixtures / "byte8_data.lbbt");
  double net = 0.0, bound = 0.0;
  constexpr size_t kItems = 200;
  for (size_t i = 0; i < kItems; ++i) {
    const Indices x = Row(data, i);
    AnsStream s(DeriveSeed(1, i));
    DequantEncode(x, 8, model, Dequantizer::Uniform(), Params(1), s);
    net += s.net_bits() / 8;
    bound += EstimateDequantBound(x, 8, model, Dequantizer::Uniform(), 64, i)
                 .bits_per_dim;
  }
  EXPECT_NEAR(net / kItems, bound / kItems, 0.05);
}

TEST(Dequant, BoundIsAboveTheCellProbability) {
  const FlowModel model = ToyByteModel(1, 3);
  const FlowModel flow = ToyDequantizer(1, 4);
  for (int64_t x : {120, 126, 128, 131, 140}) {
    const double exact = CellBits(model, x);
    for (const Dequantizer& dq :
         {Dequantizer::Uniform(), Dequantizer::ConditionalFlow(flow)}) {
      const DequantBound b = EstimateDequantBound(Indices{x}, 8, model, dq, 4000, 7);
      EXPECT_GE(b.bits_per_dim, exact - 3 * b.stderr_bits) << "x=" << x;
    }
  }
}

TEST(Dequant, BoundIsSeedStable) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const FlowModel flow = LoadWeights(kFixtures / "dequant8.lbbw");
  const Tensor data = LoadTensor(kFixtures / "byte8_data.lbbt");
  const Indices x = Row(data, 0);
  for (const Dequantizer& dq :
       {Dequantizer::Uniform(), Dequantizer::ConditionalFlow(flow)}) {
    const DequantBound a = EstimateDequantBound(x, 8, model, dq, 2000, 1);
    const DequantBound b = EstimateDequantBound(x, 8, model, dq, 2000, 2);
    EXPECT_NE(a.bits_per_dim, b.bits_per_dim);
    EXPECT_LE(std::abs(a.bits_per_dim - b.bits_per_dim),
              3 * std::hypot(a.stderr_bits, b.stderr_bits));
  }
}

}  // namespace
}  // namespace lbb
