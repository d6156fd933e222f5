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

#ifndef LBB_DEQUANT_H_
#define LBB_DEQUANT_H_

// Bits-back dequantization of integer data.
//
// The sender decodes noise ū ∈ [0,1)^d on the 2^-k grid, encodes
// x̄ = x° + ū with the density model, and the receiver recovers x° and ū by
// splitting x̄'s bin index at bit k.

#include <cstddef>
#include <cstdint>
#include <span>

#include "lbb/ans.h"
#include "lbb/codec.h"
#include "lbb/flow.h"

namespace lbb {

enum class DequantKind : uint8_t { kUniform = 0, kConditionalFlow = 1 };

// kConditionalFlow: `flow` maps ε → u in the sampling direction, ends in
// SigmoidSquash, and takes x°/2^b as context.
struct Dequantizer {
  DequantKind kind = DequantKind::kUniform;
  const FlowModel* flow = nullptr;

  static Dequantizer Uniform() { return {}; }
  static Dequantizer ConditionalFlow(const FlowModel& flow);
};

Vec DequantContext(std::span<const int64_t> x, int bit_depth);

void DequantEncode(std::span<const int64_t> x, int bit_depth,
                   const FlowModel& model, const Dequantizer& dequantizer,
                   const CodecParams& params, AnsStream& stream);
Indices DequantDecode(size_t dim, int bit_depth, const FlowModel& model,
                      const Dequantizer& dequantizer, const CodecParams& params,
                      AnsStream& stream);

// Monte-Carlo estimate of E_u[log q(u|x°) - log p(x° + u)] in bits/dim.
struct DequantBound {
  double bits_per_dim = 0.0;
  double stderr_bits = 0.0;
};

DequantBound EstimateDequantBound(std::span<const int64_t> x, int bit_depth,
                                  const FlowModel& model,
                                  const Dequantizer& dequantizer,
                                  size_t n_samples, uint64_t seed);

}  // namespace lbb

#endif  // LBB_DEQUANT_H_
