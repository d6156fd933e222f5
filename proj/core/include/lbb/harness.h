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

#ifndef LBB_HARNESS_H_
#define LBB_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbb/codec.h"
#include "lbb/flow.h"
#include "lbb/io.h"

namespace lbb {

// Accepts "2^-14", "2^3", or any decimal double.
double ParseSigma(std::string_view text);

struct EvalResult {
  double bits_per_dim = 0.0;
  double stderr_bits = 0.0;
  size_t items = 0;
  bool integer_data = false;
};

// u8 data: dequantization bound averaged over items. f64 data of shape
// (n, d): -log2 p(x̄)/d + k on the 2^-k grid.
EvalResult Evaluate(const FlowModel& model, const FlowModel* dequantizer,
                    const Tensor& data, int bit_depth, int k,
                    size_t n_samples, uint64_t seed);

struct SweepCell {
  int k = 0;
  double sigma = 0.0;
  size_t runs = 0;
  size_t failures = 0;
  double mean = 0.0;      // net bits/dim over successful runs
  double stddev = 0.0;
  double aux_mean = 0.0;  // peak auxiliary bits/dim
  double aux_stddev = 0.0;
  std::string first_error;

  bool ok() const { return failures == 0; }
};

// Codes the first `items` rows of `data` under `seeds` reservoir seeds.
// Coding errors are counted, not thrown.
SweepCell RunSweepCell(const FlowModel& model, const FlowModel* dequantizer,
                       const Tensor& data, int bit_depth,
                       const CodecParams& params, size_t seeds, size_t items,
                       size_t threads);

std::string SweepCsvHeader();
std::string SweepCsvRow(const SweepCell& cell);

struct Timing {
  double mean = 0.0;
  double stddev = 0.0;
};

struct BenchRow {
  size_t dim = 0;
  Timing blackbox_encode, blackbox_decode;
  Timing compositional_encode, compositional_decode;
  double blackbox_bits_per_dim = 0.0;
  double compositional_bits_per_dim = 0.0;
  double theoretical_bits_per_dim = 0.0;
};

// Times both codecs on `reps` samples drawn from the model. Throws if a
// round trip fails.
BenchRow BenchDimension(const FlowModel& model, const CodecParams& params,
                        size_t reps, uint64_t seed);

// Least-squares slope of log y against log x.
double LogLogSlope(std::span<const double> x, std::span<const double> y);

struct SuiteResult {
  std::string name;
  size_t passed = 0;
  size_t total = 0;
};

std::vector<SuiteResult> RunSelfTest(uint64_t seed = 1);

}  // namespace lbb

#endif  // LBB_HARNESS_H_
