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

#ifndef LBB_ARCHIVE_H_
#define LBB_ARCHIVE_H_

// LBBA archive: a header followed by one ANS stream per item.
//
//   "LBBA" | u32 version | u64 model_hash | u8 bit_depth | u32 dim
//   | u64 item_count | u32 k_x | u32 k_z | f64 sigma | u32 r | f64 T
//   | u64 seed | u64 aux_words | u8 dequant_kind | u64 dequant_hash
//   | u64 payload_length | payload
//
// Item i is coded on a stream seeded with DeriveSeed(seed, i). Its record is
//   u32 elided | u32 n_words | u64 state | u32 words[n_words]
// where the `elided` bottom words of the stack were untouched reservoir
// words and are regenerated by the receiver. All integers little-endian.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lbb/codec.h"
#include "lbb/dequant.h"
#include "lbb/flow.h"
#include "lbb/io.h"

namespace lbb {

inline constexpr uint32_t kArchiveVersion = 1;

struct ArchiveHeader {
  uint64_t model_hash = 0;
  uint8_t bit_depth = 8;
  uint32_t dim = 0;
  uint64_t item_count = 0;
  CodecParams params;
  DequantKind dequant_kind = DequantKind::kUniform;
  uint64_t dequant_hash = 0;
  uint64_t payload_length = 0;

  friend bool operator==(const ArchiveHeader& a, const ArchiveHeader& b);
};

void WriteHeader(ByteWriter& w, const ArchiveHeader& header);
ArchiveHeader ReadHeader(ByteReader& r);

struct ItemReport {
  double net_bits = 0.0;
  double peak_aux_bits = 0.0;  // largest reservoir deficit during encode
  size_t extension_words = 0;
};

struct CompressReport {
  std::vector<ItemReport> items;
  size_t dim = 0;
  size_t archive_bytes = 0;
  double seconds = 0.0;

  double MeanNetBitsPerDim() const;
  double MeanPeakAuxBitsPerDim() const;
};

struct DecompressReport {
  size_t items = 0;
  bool reservoir_verified = false;
  double seconds = 0.0;
};

// `data` is a u8 tensor of shape (n, d). `dequantizer` may be null for the
// uniform dequantizer.
std::vector<uint8_t> CompressArchive(const FlowModel& model,
                                     const FlowModel* dequantizer,
                                     const Tensor& data, int bit_depth,
                                     const CodecParams& params, size_t threads,
                                     CompressReport* report = nullptr);

// Throws HashMismatch for the wrong model or dequantizer and CorruptArchive
// for malformed input or a stream that does not restore its reservoir.
Tensor DecompressArchive(const FlowModel& model, const FlowModel* dequantizer,
                         std::span<const uint8_t> archive, size_t threads,
                         DecompressReport* report = nullptr);

ArchiveHeader PeekHeader(std::span<const uint8_t> archive);

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by any call is rethrown after all workers stop.
void ParallelFor(size_t n, size_t threads, const std::function<void(size_t)>& fn);

}  // namespace lbb

#endif  // LBB_ARCHIVE_H_
