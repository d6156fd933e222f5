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


#include "lbb/harness.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "lbb/io.h"
#include "lbb/toy.h"
#include "test_util.h"

namespace lbb {
namespace {

const std::filesystem::path kFixtures = LBB_FIXTURE_DIR;

TEST(ParseSigma, Forms) {
  EXPECT_EQ(ParseSigma("2^-14"), 0x1.0p-14);
  EXPECT_EQ(ParseSigma("2^3"), 8.0);
  EXPECT_EQ(ParseSigma("0.25"), 0.25);
  EXPECT_EQ(ParseSigma("1e-3"), 1e-3);
  for (const char* bad : {"", "2^", "2^-x", "abc", "0.5x", "3^2"}) {
    EXPECT_LBB_ERROR(ParseSigma(bad), ErrorCode::kInvalidArgument);
  }
}

TEST(LogLogSlope, PowerLaws) {
  const std::vector<double> x = {16, 64, 256};
  EXPECT_NEAR(LogLogSlope(x, std::vector<double>{3, 48, 768}), 2.0, 1e-12);
  EXPECT_NEAR(LogLogSlope(x, std::vector<double>{5, 20, 80}), 1.0, 1e-12);
}

TEST(Evaluate, IdentityModelAtTheOrigin) {
  const FlowModel model(2, {});
  const Tensor origin{DType::kF64, {1, 2}, {}, {0.0, 0.0}};
  const EvalResult r = Evaluate(model, nullptr, origin, 8, 24, 1, 0);
  EXPECT_FALSE(r.integer_data);
  EXPECT_NEAR(r.bits_per_dim, std::log2(2 * std::numbers::pi) / 2 + 24, 1e-9);
}

TEST(Evaluate, IntegerDataUsesTheDequantizationBound) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const Tensor all = LoadTensor(kFixtures / "byte8_data.lbbt");
  const Tensor data{DType::kU8, {10, 8}, {all.u8.begin(), all.u8.begin() + 80}, {}};
  const EvalResult a = Evaluate(model, nullptr, data, 8, 24, 64, 3);
  const EvalResult b = Evaluate(model, nullptr, data, 8, 24, 64, 3);
  EXPECT_TRUE(a.integer_data);
  EXPECT_EQ(a.items, 10u);
  EXPECT_EQ(a.bits_per_dim, b.bits_per_dim);
  EXPECT_GT(a.bits_per_dim, 0.0);
}

TEST(Sweep, CsvIsDeterministic) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const Tensor data = LoadTensor(kFixtures / "byte8_data.lbbt");
  CodecParams p;
  p.k_x = p.k_z = 20;
  p.sigma = 0x1.0p-12;
  const SweepCell a = RunSweepCell(model, nullptr, data, 8, p, 2, 5, 1);
  const SweepCell b = RunSweepCell(model, nullptr, data, 8, p, 2, 5, 2);
  EXPECT_EQ(a.runs, 10u);
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(SweepCsvRow(a), SweepCsvRow(b));
  EXPECT_EQ(SweepCsvHeader(),
            "k,sigma,net_bits_per_dim,net_std,aux_bits_per_dim,aux_std,status,"
            "failures,runs");
  EXPECT_EQ(SweepCsvRow(a).rfind("20,0.000244140625,", 0), 0u);
}

TEST(Sweep, AuxBitsGrowWithPrecision) {
  const FlowModel model = LoadWeights(kFixtures / "byte8.lbbw");
  const Tensor data = LoadTensor(kFixtures / "byte8_data.lbbt");
  double last = 0.0;
  for (int k : {16, 20, 24}) {
    CodecParams p;
    p.k_x = p.k_z = k;
    p.sigma = 0x1.0p-12;
    const SweepCell c = RunSweepCell(model, nullptr, data, 8, p, 2, 5, 1);
    EXPECT_GT(c.aux_mean, last) << "k=" << k;
    last = c.aux_mean;
  }
}

TEST(SelfTest, AllSuitesPass) {
  for (const SuiteResult& s : RunSelfTest(1)) {
    EXPECT_GT(s.total, 0u) << s.name;
    EXPECT_EQ(s.passed, s.total) << s.name;
  }
}

}  // namespace
}  // namespace lbb
