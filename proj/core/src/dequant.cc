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

#include <cmath>
#include <numbers>
#include <string>

#include "lbb/error.h"
#include "lbb/random.h"

namespace lbb {

namespace {

void CheckRange(std::span<const int64_t> x, int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) {
    Fail(ErrorCode::kInvalidArgument, "bit depth must be in [1, 16]");
  }
  for (int64_t v : x) {
    if (v < 0 || v >= (int64_t{1} << bit_depth)) {
      Fail(ErrorCode::kOutOfRange,
           "value " + std::to_string(v) + " exceeds bit depth " +
               std::to_string(bit_depth));
    }
  }
}

void CheckFlow(const Dequantizer& dq, size_t dim) {
  if (dq.kind != DequantKind::kConditionalFlow) return;
  if (dq.flow == nullptr) {
    Fail(ErrorCode::kInvalidArgument, "conditional dequantizer without a flow");
  }
  if (dq.flow->dim() != dim || dq.flow->context_dim() != dim) {
    Fail(ErrorCode::kDimensionMismatch,
         "dequantizer must have dimension and context dimension " +
             std::to_string(dim));
  }
}

// Uniform values wider than the coder's 32-bit limit are split in two.
void EncodeWide(AnsStream& stream, uint64_t v, int bits) {
  const int low = std::min(bits, 32);
  stream.EncodeUniform(v & ((uint64_t{1} << low) - 1), low);
  stream.EncodeUniform(v >> low, bits - low);
}

uint64_t DecodeWide(AnsStream& stream, int bits) {
  const int low = std::min(bits, 32);
  const uint64_t high = stream.DecodeUniform(bits - low);
  return (high << low) | stream.DecodeUniform(low);
}

}  // namespace

Dequantizer Dequantizer::ConditionalFlow(const FlowModel& flow) {
  return {DequantKind::kConditionalFlow, &flow};
}

Vec DequantContext(std::span<const int64_t> x, int bit_depth) {
  Vec ctx(x.size());
  for (size_t i = 0; i < x.size(); ++i) ctx[i] = std::ldexp(double(x[i]), -bit_depth);
  return ctx;
}

void DequantEncode(std::span<const int64_t> x, int bit_depth,
                   const FlowModel& model, const Dequantizer& dq,
                   const CodecParams& params, AnsStream& stream) {
  params.Validate();
  CheckRange(x, bit_depth);
  CheckFlow(dq, x.size());
  const int k = params.k();
  const size_t d = x.size();
  Indices u(d);
  if (dq.kind == DequantKind::kUniform) {
    for (size_t i = 0; i < d; ++i) u[i] = static_cast<int64_t>(DecodeWide(stream, k));
  } else {
    const Vec ctx = DequantContext(x, bit_depth);
    const Indices eps = DecodePrior(d, params, stream, true);
    u = DecodeChain(CodingChain::Sampling(*dq.flow), eps, ctx, params, stream);
    for (int64_t v : u) {
      if (v < 0 || v >= (int64_t{1} << k)) {
        Fail(ErrorCode::kOutOfSupport, "dequantization noise outside [0, 1)");
      }
    }
  }
  GridPoint xbar{Indices(d), k};
  for (size_t i = 0; i < d; ++i) xbar.indices[i] = (x[i] << k) + u[i];
  CompositionalEncode(model, xbar, params, stream);
}

Indices DequantDecode(size_t dim, int bit_depth, const FlowModel& model,
                      const Dequantizer& dq, const CodecParams& params,
                      AnsStream& stream) {
  params.Validate();
  CheckFlow(dq, dim);
  if (model.dim() != dim) {
    Fail(ErrorCode::kDimensionMismatch, "model dimension mismatch");
  }
  const int k = params.k();
  const GridPoint xbar = CompositionalDecode(model, params, stream);
  Indices x(dim), u(dim);
  for (size_t i = 0; i < dim; ++i) {
    x[i] = xbar.indices[i] >> k;
    u[i] = xbar.indices[i] - (x[i] << k);
  }
  CheckRange(x, bit_depth);
  if (dq.kind == DequantKind::kUniform) {
    for (size_t i = dim; i-- > 0;) EncodeWide(stream, static_cast<uint64_t>(u[i]), k);
  } else {
    const Vec ctx = DequantContext(x, bit_depth);
    const Indices eps =
        EncodeChain(CodingChain::Sampling(*dq.flow), u, ctx, params, stream);
    EncodePrior(eps, params, stream, true);
  }
  return x;
}

DequantBound EstimateDequantBound(std::span<const int64_t> x, int bit_depth,
                                  const FlowModel& model,
                                  const Dequantizer& dq, size_t n_samples,
                                  uint64_t seed) {
  CheckRange(x, bit_depth);
  CheckFlow(dq, x.size());
  const size_t d = x.size();
  const Vec ctx = DequantContext(x, bit_depth);
  Xoshiro256 rng(seed);
  Vec u(d), xu(d), eps(d);
  double mean = 0.0, m2 = 0.0;
  const size_t n = std::max<size_t>(1, n_samples);
  for (size_t s = 0; s < n; ++s) {
    double log_q = 0.0;
    if (dq.kind == DequantKind::kUniform) {
      for (double& v : u) v = rng.Uniform();
    } else {
      for (double& e : eps) e = rng.Normal();
      double log_det = 0.0;
      u = dq.flow->ForwardWithLogDet(eps, log_det, ctx);
      log_q = StandardNormalLogDensity(eps) - log_det;
    }
    for (size_t i = 0; i < d; ++i) xu[i] = double(x[i]) + u[i];
    const double bits =
        (log_q - model.LogDensity(xu)) / std::numbers::ln2 / double(d);
    const double step = bits - mean;
    mean += step / double(s + 1);
    m2 += step * (bits - mean);
  }
  return {mean, n > 1 ? std::sqrt(m2 / double(n - 1) / double(n)) : 0.0};
}

}  // namespace lbb
