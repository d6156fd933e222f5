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

#ifndef LBB_CODEC_H_
#define LBB_CODEC_H_

// Local bits-back codecs for flow models.
//
// Every codec moves a datapoint x̄ on the 2^-k grid onto an AnsStream. The
// sender decodes z̄ ~ N(f(x̄), σ²JJᵀ) from the stream, encodes x̄ under
// N(f⁻¹(z̄), σ²I), and hands z̄ to the next stage. The receiver runs the same
// steps backwards. Encoders visit coordinates d→1 and decoders 1→d, except
// for the z̄ draw in the black-box path, which follows the autoregressive
// factorization 1→d on the sender and is re-encoded d→1 by the receiver.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lbb/ans.h"
#include "lbb/flow.h"
#include "lbb/gaussian.h"

namespace lbb {

struct CodecParams {
  int k_x = 32;
  int k_z = 32;
  double sigma = 0x1.0p-14;
  int r = 24;
  double T = 16.0;
  uint64_t seed = 0;
  size_t aux_words = 0;

  // Throws InvalidArgument on k_x != k_z, σ <= 0, or out-of-range k, r, T.
  void Validate() const;
  // σ·2^k >= 4; below this the codec still works but costs blow up.
  bool WellConditioned() const;
  int k() const { return k_x; }
  // Both windows span ±T stddevs. Code-side bins (values the sender
  // encodes) add an escape slot for values outside the window; draw-side
  // bins never need one.
  GaussianBinSpec DrawSpec(double mean, double stddev) const {
    return {mean, stddev, k_x, r, T};
  }
  GaussianBinSpec CodeSpec(double mean, double stddev) const {
    return {mean, stddev, k_x, r, T};
  }
};

// One invertible stage of a coding chain. An inverted step codes the
// layer's inverse map.
struct CodingStep {
  const FlowLayer* layer = nullptr;
  bool inverted = false;
  // The sender draws x̄ and encodes z̄, so x̄ gets the draw-side bins and
  // z̄ the code-side bins.
  bool sampling = false;
};

// Density-direction chain: x → f_1 → ... → f_K → z, prior N(0, I) on z.
class CodingChain {
 public:
  // Codes data through the model's forward map.
  static CodingChain Forward(const FlowModel& model);
  // For a model written in the sampling direction (latent → data): codes
  // data through the inverse map, last layer first. Steps are marked
  // `sampling`.
  static CodingChain Sampling(const FlowModel& model);

  size_t dim() const { return dim_; }
  size_t context_dim() const { return context_dim_; }
  std::span<const CodingStep> steps() const { return steps_; }

 private:
  size_t dim_ = 0;
  size_t context_dim_ = 0;
  std::vector<CodingStep> steps_;
};

Vec StepForward(const CodingStep& step, std::span<const double> x,
                std::span<const double> context = {});
Vec StepInverse(const CodingStep& step, std::span<const double> z,
                std::span<const double> context = {});

using Indices = std::vector<int64_t>;

// Single-step codecs. Encode consumes x̄ and returns z̄; Decode consumes z̄
// and returns x̄. Coupling layers copy pass-through indices; DenseLinear is
// coded block by block through its Gaussian-to-autoregressive form.
Indices EncodeStep(const CodingStep& step, const Indices& x,
                   std::span<const double> context, const CodecParams& params,
                   AnsStream& stream);
Indices DecodeStep(const CodingStep& step, const Indices& z,
                   std::span<const double> context, const CodecParams& params,
                   AnsStream& stream);

GridPoint LayerEncode(const FlowLayer& layer, const GridPoint& x,
                      const CodecParams& params, AnsStream& stream,
                      std::span<const double> context = {});
GridPoint LayerDecode(const FlowLayer& layer, const GridPoint& z,
                      const CodecParams& params, AnsStream& stream,
                      std::span<const double> context = {});

// Standard normal prior, one coordinate at a time. With `drawn` the sender
// samples z̄ from the stream instead of encoding a known value.
void EncodePrior(const Indices& z, const CodecParams& params, AnsStream& stream,
                 bool drawn = false);
Indices DecodePrior(size_t dim, const CodecParams& params, AnsStream& stream,
                    bool drawn = false);

// Chain codecs without the prior: Encode returns z̄_K, Decode takes it.
Indices EncodeChain(const CodingChain& chain, const Indices& x,
                    std::span<const double> context, const CodecParams& params,
                    AnsStream& stream);
Indices DecodeChain(const CodingChain& chain, const Indices& z,
                    std::span<const double> context, const CodecParams& params,
                    AnsStream& stream);

// Compositional codec: each layer in turn, then the prior.
void CompositionalEncode(const FlowModel& model, const GridPoint& x,
                         const CodecParams& params, AnsStream& stream,
                         std::span<const double> context = {});
GridPoint CompositionalDecode(const FlowModel& model,
                              const CodecParams& params, AnsStream& stream,
                              std::span<const double> context = {});

// Black-box codec: one dense d×d Jacobian for the whole flow.
void BlackboxEncode(const FlowModel& model, const GridPoint& x,
                    const CodecParams& params, AnsStream& stream,
                    std::span<const double> context = {});
GridPoint BlackboxDecode(const FlowModel& model, const CodecParams& params,
                         AnsStream& stream,
                         std::span<const double> context = {});

// -log2 p(x̄) + k·d: the codelength the codecs approach as σ → 0.
double TheoreticalBits(const FlowModel& model, const GridPoint& x,
                       std::span<const double> context = {});

// Monte-Carlo estimate of E[log p̃(z|x) - log p̃(x|z)] under
// z = f(x) + σJε, in nats. The estimate equals -log|det J(x)| + O(σ²).
// Samples come in antithetic pairs (ε, -ε); the same seed reproduces the
// same ε sequence for every σ.
struct LogdetGap {
  double estimate = 0.0;
  double neg_log_det = 0.0;
  double excess = 0.0;          // estimate - neg_log_det
  double excess_stderr = 0.0;
};

LogdetGap EstimateLogdetGap(const FlowModel& model, std::span<const double> x,
                            double sigma, size_t n_samples, uint64_t seed);

}  // namespace lbb

#endif  // LBB_CODEC_H_
