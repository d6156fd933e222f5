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


#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "lbb/ans.h"
#include "lbb/ar.h"
#include "lbb/codec.h"
#include "lbb/gaussian.h"
#include "lbb/random.h"
#include "lbb/toy.h"

namespace lbb {
namespace {

void BM_AnsRoundTrip(benchmark::State& state) {
  const SymbolTable table = BuildTable({0.0, 1.0, 4, 16, 8.0});
  Xoshiro256 rng(1);
  std::vector<int64_t> symbols(4096);
  for (auto& s : symbols) s = table.min_symbol() + int64_t(rng() % table.size());
  for (auto _ : state) {
    AnsStream stream(1, 0);
    for (int64_t s : symbols) stream.Encode(table, s);
    for (size_t i = symbols.size(); i-- > 0;) benchmark::DoNotOptimize(stream.Decode(table));
  }
  state.SetItemsProcessed(state.iterations() * symbols.size());
}
BENCHMARK(BM_AnsRoundTrip);

void BM_GaussianBinsCode(benchmark::State& state) {
  Xoshiro256 rng(2);
  const int r = static_cast<int>(state.range(0));
  AnsStream stream(2, 0);
  for (auto _ : state) {
    const GaussianBins bins({rng.Normal(), 0x1.0p-12, 24, r, 16.0});
    const int64_t n = bins.Decode(stream);
    bins.Encode(stream, n);
  }
}
BENCHMARK(BM_GaussianBinsCode)->Arg(16)->Arg(24)->Arg(32);

void BM_BuildTable(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(BuildTable({0.3, 0.7, 4, 16, 8.0}));
  }
}
BENCHMARK(BM_BuildTable);

void BM_GaussianToAr(benchmark::State& state) {
  const size_t d = static_cast<size_t>(state.range(0));
  Xoshiro256 rng(3);
  Matrix j(d, d);
  for (double& v : j.data()) v = rng.Normal();
  for (auto _ : state) benchmark::DoNotOptimize(GaussianToAr(j));
}
BENCHMARK(BM_GaussianToAr)->RangeMultiplier(4)->Range(4, 256);

template <bool kBlackbox>
void BM_Encode(benchmark::State& state) {
  const size_t d = static_cast<size_t>(state.range(0));
  ToyFlowOptions options;
  options.hidden = 16;
  const FlowModel model = ToyRealNvp(d, 1, options);
  CodecParams params;
  params.k_x = params.k_z = 24;
  params.sigma = 0x1.0p-12;
  Xoshiro256 rng(4);
  const GridPoint x = Quantize(SampleFlow(model, rng), params.k_x);
  for (auto _ : state) {
    AnsStream stream(5, 0);
    if (kBlackbox) {
      BlackboxEncode(model, x, params, stream);
    } else {
      CompositionalEncode(model, x, params, stream);
    }
    benchmark::DoNotOptimize(stream.state());
  }
  state.SetComplexityN(static_cast<int64_t>(d));
}
BENCHMARK(BM_Encode<false>)->Name("BM_CompositionalEncode")->RangeMultiplier(4)
    ->Range(16, 256)->Complexity(benchmark::oN);
BENCHMARK(BM_Encode<true>)->Name("BM_BlackboxEncode")->RangeMultiplier(4)
    ->Range(16, 256)->Complexity();

}  // namespace
}  // namespace lbb

BENCHMARK_MAIN();
