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

#ifndef LBB_IO_H_
#define LBB_IO_H_

// Binary file formats. All integers and floats are little endian.
//
// Weights ("LBBW"):
//   char[4] "LBBW" | u32 version (1) | u32 layer_count | u32 dim |
//   u32 context_dim | layer * layer_count
// layer:
//   u8 tag | u32 dims | payload
//   tag 1 ActNorm:        f64[dims] scale, f64[dims] bias
//   tag 2 DenseLinear:    u32 block, f64[block*block] W (row major)
//   tag 3 AffineCoupling: u8 flip, u32 context_dim, mlp
//   tag 4 Autoregressive: u32 context_dim, mlp (weights stored masked)
//   tag 5 SigmoidSquash:  (empty)
// mlp:
//   u32 n_linear | (u32 out, u32 in, f64[out*in] W, f64[out] bias) * n_linear
//
// Tensor ("LBBT"):
//   char[4] "LBBT" | u8 dtype (0 = u8, 1 = f64) | u32 rank | u64[rank] dims |
//   payload

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lbb/error.h"
#include "lbb/flow.h"

namespace lbb {

inline constexpr uint32_t kWeightsVersion = 1;

std::vector<uint8_t> SerializeModel(const FlowModel& model);
FlowModel DeserializeModel(std::span<const uint8_t> bytes);

void SaveWeights(const FlowModel& model, const std::filesystem::path& path);
FlowModel LoadWeights(const std::filesystem::path& path);

// FNV-1a over the serialized weights; identifies a model in archives.
uint64_t ModelHash(const FlowModel& model);
uint64_t Fnv1a64(std::span<const uint8_t> bytes,
                 uint64_t basis = 0xCBF29CE484222325ull);

enum class DType : uint8_t { kU8 = 0, kF64 = 1 };

struct Tensor {
  DType dtype = DType::kU8;
  std::vector<uint64_t> shape;
  std::vector<uint8_t> u8;
  std::vector<double> f64;

  uint64_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::vector<uint8_t> SerializeTensor(const Tensor& tensor);
Tensor DeserializeTensor(std::span<const uint8_t> bytes);
void SaveTensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor LoadTensor(const std::filesystem::path& path);

std::vector<uint8_t> ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path,
               std::span<const uint8_t> bytes);

// Little-endian cursor helpers shared by the container formats.
class ByteWriter {
 public:
  void U8(uint8_t v) { bytes_.push_back(v); }
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F64(double v);
  void Raw(std::span<const uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }
  std::vector<uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

// Reads past the end throw `error` (CorruptTensor or CorruptArchive).
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> bytes, ErrorCode error)
      : bytes_(bytes), error_(error) {}
  uint8_t U8();
  uint32_t U32();
  uint64_t U64();
  double F64();
  std::span<const uint8_t> Raw(size_t n);
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(size_t n);
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  ErrorCode error_;
};

}  // namespace lbb

#endif  // LBB_IO_H_
