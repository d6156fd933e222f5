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


#include "lbb/io.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "lbb/random.h"
#include "lbb/toy.h"
#include "test_util.h"

namespace lbb {
namespace {

namespace fs = std::filesystem;

std::vector<FlowModel> Models() {
  ToyFlowOptions ctx;
  ctx.context_dim = 4;
  return {ToyRealNvp(8, 1), ToyRealNvp(8, 2, ctx), ToyAutoregressive(5, 3),
          ToyByteModel(4, 4), ToyDequantizer(4, 5), FlowModel(3, {})};
}

fs::path TempPath(const std::string& name) {
  return fs::path(::testing::TempDir()) / name;
}

TEST(Bytes, LittleEndian) {
  ByteWriter w;
  w.U32(0x01020304u);
  w.U64(0x0102030405060708ull);
  w.F64(1.0);
  EXPECT_EQ(w.bytes(), (std::vector<uint8_t>{4, 3, 2, 1, 8, 7, 6, 5, 4, 3, 2, 1,
                                             0, 0, 0, 0, 0, 0, 0xF0, 0x3F}));
  ByteReader r(w.bytes(), ErrorCode::kCorruptTensor);
  EXPECT_EQ(r.U32(), 0x01020304u);
  EXPECT_EQ(r.U64(), 0x0102030405060708ull);
  EXPECT_EQ(r.F64(), 1.0);
  EXPECT_LBB_ERROR(r.U8(), ErrorCode::kCorruptTensor);
}

TEST(Fnv1a64, KnownVectors) {
  EXPECT_EQ(Fnv1a64({}), 0xCBF29CE484222325ull);
  const std::string a = "a";
  EXPECT_EQ(Fnv1a64({reinterpret_cast<const uint8_t*>(a.data()), a.size()}),
            0xAF63DC4C8601EC8Cull);
}

TEST(Weights, RoundTripIsBitExact) {
  Xoshiro256 rng(3);
  for (const FlowModel& model : Models()) {
    const auto bytes = SerializeModel(model);
    EXPECT_EQ(bytes[4], kWeightsVersion);
    const FlowModel back = DeserializeModel(bytes);
    EXPECT_EQ(SerializeModel(back), bytes);
    EXPECT_EQ(ModelHash(back), ModelHash(model));
    EXPECT_EQ(back.context_dim(), model.context_dim());
    Vec x(model.dim()), ctx(model.context_dim());
    for (double& v : x) v = rng.Normal();
    for (double& v : ctx) v = rng.Uniform();
    EXPECT_EQ(back.Forward(x, ctx), model.Forward(x, ctx));
  }
}

TEST(Weights, FileRoundTrip) {
  const FlowModel model = ToyRealNvp(8, 7);
  const fs::path path = TempPath("model.lbbw");
  SaveWeights(model, path);
  EXPECT_EQ(SerializeModel(LoadWeights(path)), SerializeModel(model));
  EXPECT_LBB_ERROR(LoadWeights(TempPath("missing.lbbw")), ErrorCode::kIo);
}

TEST(Weights, HashTracksParameters) {
  FlowModel a = ToyRealNvp(8, 7), b = ToyRealNvp(8, 8);
  EXPECT_NE(ModelHash(a), ModelHash(b));
  EXPECT_EQ(ModelHash(a), ModelHash(ToyRealNvp(8, 7)));
}

TEST(Weights, TruncationIsDetected) {
  const auto bytes = SerializeModel(ToyRealNvp(8, 9));
  for (size_t n = 4; n < bytes.size(); n += 1 + n / 16) {
    EXPECT_LBB_ERROR(
        DeserializeModel(std::span<const uint8_t>(bytes.data(), n)),
        ErrorCode::kCorruptTensor);
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_LBB_ERROR(DeserializeModel(longer), ErrorCode::kCorruptTensor);
}

TEST(Weights, BadMagicAndVersion) {
  auto bytes = SerializeModel(ToyRealNvp(8, 9));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_LBB_ERROR(DeserializeModel(bad), ErrorCode::kBadMagic);
  EXPECT_LBB_ERROR(DeserializeModel(std::span<const uint8_t>(bytes.data(), 2)),
                   ErrorCode::kBadMagic);
  bad = bytes;
  bad[4] = 2;
  EXPECT_LBB_ERROR(DeserializeModel(bad), ErrorCode::kVersionMismatch);
}

TEST(Tensor, RoundTrip) {
  Tensor u8{DType::kU8, {2, 3}, {1, 2, 3, 250, 251, 252}, {}};
  Tensor f64{DType::kF64, {3}, {}, {0.5, -1e300, std::ldexp(1.0, -1074)}};
  for (const Tensor& t : {u8, f64}) {
    EXPECT_EQ(DeserializeTensor(SerializeTensor(t)), t);
    const fs::path path = TempPath("tensor.lbbt");
    SaveTensor(t, path);
    EXPECT_EQ(LoadTensor(path), t);
  }
  EXPECT_EQ(u8.element_count(), 6u);
}

TEST(Tensor, CorruptionIsDetected) {
  Tensor t{DType::kF64, {2, 2}, {}, {1, 2, 3, 4}};
  const auto bytes = SerializeTensor(t);
  for (size_t n = 5; n < bytes.size(); ++n) {
    EXPECT_LBB_ERROR(
        DeserializeTensor(std::span<const uint8_t>(bytes.data(), n)),
        ErrorCode::kCorruptTensor);
  }
  auto bad = bytes;
  bad[1] = 'Z';
  EXPECT_LBB_ERROR(DeserializeTensor(bad), ErrorCode::kBadMagic);
  bad = bytes;
  bad[4] = 7;
  EXPECT_LBB_ERROR(DeserializeTensor(bad), ErrorCode::kCorruptTensor);
}

TEST(Fixtures, LoadAndEvaluate) {
  const fs::path dir = LBB_FIXTURE_DIR;
  for (const char* name : {"composite16", "composite64", "composite256",
                           "nonlinear2", "ar4", "byte8", "dequant8"}) {
    const FlowModel model = LoadWeights(dir / (std::string(name) + ".lbbw"));
    Vec x(model.dim(), 0.1), ctx(model.context_dim(), 0.5);
    if (std::string(name) == "byte8") x.assign(model.dim(), 128.5);
    EXPECT_TRUE(std::isfinite(model.LogDensity(x, ctx))) << name;
  }
  const FlowModel composite = LoadWeights(dir / "composite16.lbbw");
  const Tensor points = LoadTensor(dir / "composite16_points.lbbt");
  ASSERT_EQ(points.dtype, DType::kF64);
  ASSERT_EQ(points.shape, (std::vector<uint64_t>{500, 16}));
  for (size_t i = 0; i < 500; ++i) {
    EXPECT_TRUE(std::isfinite(
        composite.LogDensity(std::span<const double>(points.f64).subspan(16 * i, 16))));
  }
  const Tensor bytes = LoadTensor(dir / "byte8_data.lbbt");
  EXPECT_EQ(bytes.dtype, DType::kU8);
  EXPECT_EQ(bytes.shape, (std::vector<uint64_t>{1000, 8}));
}

}  // namespace
}  // namespace lbb
