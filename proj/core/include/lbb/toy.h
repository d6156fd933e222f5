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

#ifndef LBB_TOY_H_
#define LBB_TOY_H_

// Randomly initialized flows used by the tests, benchmarks and the CLI's
// toy-model command.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lbb/flow.h"
#include "lbb/random.h"

namespace lbb {

inline constexpr size_t kToyHidden = 64;

// Two tanh hidden layers of width `hidden`; the output layer's weights are
// scaled by `out_scale`.
Mlp RandomMlp(size_t in, size_t out, Xoshiro256& rng, double out_scale,
              size_t hidden = kToyHidden);

struct ToyFlowOptions {
  size_t couplings = 4;
  size_t block = 4;           // DenseLinear block; 0 drops the layer
  double out_scale = 0.3;     // conditioner output scale
  size_t context_dim = 0;
  size_t hidden = kToyHidden;  // conditioner width
};

// ActNorm, alternating affine couplings, then a block DenseLinear.
FlowModel ToyRealNvp(size_t dim, uint64_t seed, const ToyFlowOptions& options = {});

// ActNorm followed by one masked autoregressive layer.
FlowModel ToyAutoregressive(size_t dim, uint64_t seed, double out_scale = 0.3);

struct ToyByteOptions {
  double spread = 4.0;   // data scale around 128
  size_t couplings = 4;
  // After each coupling, an ActNorm with scale 1/squeeze, then squeeze,
  // alternating. 1 adds no layers.
  double squeeze = 1.0;
};

// Density over [0, 256)^d concentrated around 128.
FlowModel ToyByteModel(size_t dim, uint64_t seed,
                       const ToyByteOptions& options = {});

// Conditional dequantizer in the sampling direction ε → u ∈ (0,1)^d, with
// x°/256 as context.
FlowModel ToyDequantizer(size_t dim, uint64_t seed);

// Draw x = f⁻¹(ε), ε ~ N(0, I).
Vec SampleFlow(const FlowModel& model, Xoshiro256& rng);

// n samples of ToyByteModel-style data: floor of flow samples clamped to
// [0, 255], row-major n × d.
std::vector<uint8_t> SampleBytes(const FlowModel& model, size_t n,
                                 uint64_t seed);

}  // namespace lbb

#endif  // LBB_TOY_H_
