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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "lbb/ans.h"
#include "lbb/ar.h"
#include "lbb/archive.h"
#include "lbb/dequant.h"
#include "lbb/error.h"
#include "lbb/gaussian.h"
#include "lbb/linalg.h"
#include "lbb/random.h"
#include "lbb/toy.h"

namespace lbb {

namespace {

struct Accumulator {
  size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void Add(double v) {
    ++n;
    const double step = v - mean;
    mean += step / double(n);
    m2 += step * (v - mean);
  }
  double Stddev() const { return n > 1 ? std::sqrt(m2 / double(n - 1)) : 0.0; }
  Timing AsTiming() const { return {mean, Stddev()}; }
};

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double ParseSigma(std::string_view text) {
  const std::string s(text);
  try {
    if (s.rfind("2^", 0) == 0) {
      size_t used = 0;
      const int e = std::stoi(s.substr(2), &used);
      if (used + 2 != s.size()) throw std::invalid_argument(s);
      return std::ldexp(1.0, e);
    }
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    Fail(ErrorCode::kInvalidArgument, "cannot parse sigma '" + s + "'");
  }
}

EvalResult Evaluate(const FlowModel& model, const FlowModel* dequantizer,
                    const Tensor& data, int bit_depth, int k,
                    size_t n_samples, uint64_t seed) {
  if (data.shape.size() != 2 || data.shape[1] != model.dim()) {
    Fail(ErrorCode::kDimensionMismatch, "data must have shape (n, d)");
  }
  const size_t n = data.shape[0];
  const size_t d = model.dim();
  EvalResult out;
  out.items = n;
  Accumulator acc;
  if (data.dtype == DType::kU8) {
    out.integer_data = true;
    const Dequantizer dq = dequantizer ? Dequantizer::ConditionalFlow(*dequantizer)
                                       : Dequantizer::Uniform();
    for (size_t i = 0; i < n; ++i) {
      const Indices x(data.u8.begin() + i * d, data.u8.begin() + (i + 1) * d);
      acc.Add(EstimateDequantBound(x, bit_depth, model, dq, n_samples,
                                   DeriveSeed(seed, i))
                  .bits_per_dim);
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      const std::span<const double> row(data.f64.data() + i * d, d);
      acc.Add(TheoreticalBits(model, Quantize(row, k)) / double(d));
    }
  }
  out.bits_per_dim = acc.mean;
  out.stderr_bits = n > 1 ? acc.Stddev() / std::sqrt(double(n)) : 0.0;
  return out;
}

SweepCell RunSweepCell(const FlowModel& model, const FlowModel* dequantizer,
                       const Tensor& data, int bit_depth,
                       const CodecParams& params, size_t seeds, size_t items,
                       size_t threads) {
  params.Validate();
  if (data.dtype != DType::kU8 || data.shape.size() != 2 ||
      data.shape[1] != model.dim()) {
    Fail(ErrorCode::kInvalidArgument, "sweep input must be u8 of shape (n, d)");
  }
  items = std::min<size_t>(items, data.shape[0]);
  const size_t d = model.dim();
  const Dequantizer dq = dequantizer ? Dequantizer::ConditionalFlow(*dequantizer)
                                     : Dequantizer::Uniform();
  const size_t runs = seeds * items;
  std::vector<double> net(runs), aux(runs);
  std::vector<char> failed(runs, 0);
  std::string first_error;
  std::mutex mu;
  ParallelFor(runs, threads, [&](size_t r) {
    const size_t s = r / items;
    const size_t i = r % items;
    const uint64_t seed = DeriveSeed(DeriveSeed(params.seed, s), i);
    const Indices x(data.u8.begin() + i * d, data.u8.begin() + (i + 1) * d);
    try {
      AnsStream stream(seed, params.aux_words);
      DequantEncode(x, bit_depth, model, dq, params, stream);
      net[r] = stream.net_bits() / double(d);
      aux[r] = -stream.min_net_bits() / double(d);
    } catch (const Error& e) {
      failed[r] = 1;
      std::lock_guard lock(mu);
      if (first_error.empty()) first_error = e.what();
    }
  });
  SweepCell cell;
  cell.k = params.k_x;
  cell.sigma = params.sigma;
  cell.runs = runs;
  cell.first_error = first_error;
  Accumulator n_acc, a_acc;
  for (size_t r = 0; r < runs; ++r) {
    if (failed[r]) {
      ++cell.failures;
      continue;
    }
    n_acc.Add(net[r]);
    a_acc.Add(aux[r]);
  }
  cell.mean = n_acc.n ? n_acc.mean : NAN;
  cell.stddev = n_acc.n ? n_acc.Stddev() : NAN;
  cell.aux_mean = a_acc.n ? a_acc.mean : NAN;
  cell.aux_stddev = a_acc.n ? a_acc.Stddev() : NAN;
  return cell;
}

std::string SweepCsvHeader() {
  return "k,sigma,net_bits_per_dim,net_std,aux_bits_per_dim,aux_std,status,"
         "failures,runs";
}

std::string SweepCsvRow(const SweepCell& c) {
  char sigma[64];
  std::snprintf(sigma, sizeof sigma, "%.9g", c.sigma);
  const bool any = c.failures < c.runs;
  auto num = [&](double v) { return any ? FormatDouble(v) : std::string("nan"); };
  return std::to_string(c.k) + "," + sigma + "," + num(c.mean) + "," +
         num(c.stddev) + "," + num(c.aux_mean) + "," + num(c.aux_stddev) + "," +
         (c.ok() ? "ok" : "FAIL") + "," + std::to_string(c.failures) + "," +
         std::to_string(c.runs);
}

BenchRow BenchDimension(const FlowModel& model, const CodecParams& params,
                        size_t reps, uint64_t seed) {
  params.Validate();
  const size_t d = model.dim();
  Xoshiro256 rng(seed);
  Accumulator be, bd, ce, cd, bb_bits, cc_bits, theory;
  for (size_t rep = 0; rep < reps; ++rep) {
    const GridPoint x = Quantize(SampleFlow(model, rng), params.k_x);
    theory.Add(TheoreticalBits(model, x) / double(d));
    const uint64_t s = DeriveSeed(seed, rep);

    AnsStream a(s, params.aux_words);
    auto t = Clock::now();
    BlackboxEncode(model, x, params, a);
    be.Add(Since(t));
    bb_bits.Add(a.net_bits() / double(d));
    t = Clock::now();
    const GridPoint xa = BlackboxDecode(model, params, a);
    bd.Add(Since(t));

    AnsStream b(s, params.aux_words);
    t = Clock::now();
    CompositionalEncode(model, x, params, b);
    ce.Add(Since(t));
    cc_bits.Add(b.net_bits() / double(d));
    t = Clock::now();
    const GridPoint xb = CompositionalDecode(model, params, b);
    cd.Add(Since(t));

    if (xa != x || xb != x || !a.MatchesReservoir(s, params.aux_words) ||
        !b.MatchesReservoir(s, params.aux_words)) {
      Fail(ErrorCode::kCorruptArchive, "benchmark round trip failed");
    }
  }
  BenchRow row;
  row.dim = d;
  row.blackbox_encode = be.AsTiming();
  row.blackbox_decode = bd.AsTiming();
  row.compositional_encode = ce.AsTiming();
  row.compositional_decode = cd.AsTiming();
  row.blackbox_bits_per_dim = bb_bits.mean;
  row.compositional_bits_per_dim = cc_bits.mean;
  row.theoretical_bits_per_dim = theory.mean;
  return row;
}

double LogLogSlope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    Fail(ErrorCode::kInvalidArgument, "slope needs two or more paired points");
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(y.size());
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// --- self-test ---------------------------------------------------------------

namespace {

template <class Case>
SuiteResult Suite(std::string name, size_t total, Case&& run_case) {
  SuiteResult r{std::move(name), 0, total};
  for (size_t i = 0; i < total; ++i) {
    try {
      if (run_case(i)) ++r.passed;
    } catch (const std::exception&) {
    }
  }
  return r;
}

double DenseGaussianLogDensity(const Matrix& cov, std::span<const double> y) {
  const Vec w = Inverse(cov) * y;
  double quad = 0.0;
  for (size_t i = 0; i < y.size(); ++i) quad += y[i] * w[i];
  return -0.5 * quad - 0.5 * LogDeterminant(cov).log_abs -
         0.5 * double(y.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

std::vector<SuiteResult> RunSelfTest(uint64_t seed) {
  std::vector<SuiteResult> out;
  Xoshiro256 rng(seed);

  out.push_back(Suite("ans_roundtrip", 100, [&](size_t i) {
    const int r = 4 + static_cast<int>(rng() % 20);
    const size_t n = 1 + rng() % std::min<uint64_t>(50, uint64_t{1} << r);
    std::vector<uint64_t> freq(n, 1);
    for (uint64_t left = (uint64_t{1} << r) - n; left > 0;) {
      const uint64_t add = 1 + rng() % left;
      freq[rng() % n] += add;
      left -= add;
    }
    const SymbolTable table(r, -3, freq);
    const uint64_t s = DeriveSeed(seed, i);
    AnsStream stream(s, 8);
    std::vector<int64_t> msg(200);
    for (auto& m : msg) m = table.min_symbol() + static_cast<int64_t>(rng() % n);
    for (auto m : msg) stream.Encode(table, m);
    for (size_t j = msg.size(); j-- > 0;) {
      if (stream.Decode(table) != msg[j]) return false;
    }
    return stream.MatchesReservoir(s, 8);
  }));

  out.push_back(Suite("table_exact_mass", 100, [&](size_t) {
    GaussianBinSpec spec;
    spec.k = static_cast<int>(rng() % 12);
    spec.stddev = std::ldexp(1.0 + rng.Uniform(), -static_cast<int>(rng() % 4));
    spec.mean = 4.0 * (rng.Uniform() - 0.5);
    spec.r = 16;
    spec.T = 8.0;
    const SymbolTable t = BuildTable(spec);
    uint64_t sum = 0;
    for (uint64_t f : t.freq()) {
      if (f == 0) return false;
      sum += f;
    }
    return sum == (uint64_t{1} << spec.r);
  }));

  out.push_back(Suite("gaussian_bins", 200, [&](size_t i) {
    GaussianBinSpec spec;
    spec.k = 4 + static_cast<int>(rng() % 28);
    spec.stddev = std::ldexp(1.0 + rng.Uniform(), -static_cast<int>(rng() % 12));
    spec.mean = 8.0 * (rng.Uniform() - 0.5);
    spec.r = 24;
    const GaussianBins bins(spec);
    const uint64_t s = DeriveSeed(seed, 1000 + i);
    AnsStream stream(s, 4);
    const int64_t n = bins.Decode(stream);
    bins.Encode(stream, n);
    return bins.Contains(n) && stream.MatchesReservoir(s, 4);
  }));

  out.push_back(Suite("gaussian_to_ar", 100, [&](size_t i) {
    const size_t d = i % 2 ? 8 : 4;
    Matrix j(d, d);
    for (double& v : j.data()) v = rng.Normal();
    const ArDecomposition ar = GaussianToAr(j);
    Vec e(d);
    for (double& v : e) v = rng.Normal();
    const Vec y = j * e;
    return std::fabs(ar.LogDensity(y) - DenseGaussianLogDensity(GramOuter(j), y)) <
           1e-8;
  }));

  const FlowModel composite = ToyRealNvp(8, seed);
  out.push_back(Suite("codec_roundtrip", 40, [&](size_t i) {
    CodecParams p;
    p.k_x = p.k_z = 12 + static_cast<int>(rng() % 16);
    p.sigma = std::ldexp(1.0, -static_cast<int>(4 + rng() % (p.k_x - 4)));
    const GridPoint x = Quantize(SampleFlow(composite, rng), p.k_x);
    const uint64_t s = DeriveSeed(seed, 2000 + i);
    AnsStream a(s, 16), b(s, 16);
    CompositionalEncode(composite, x, p, a);
    BlackboxEncode(composite, x, p, b);
    return CompositionalDecode(composite, p, a) == x &&
           BlackboxDecode(composite, p, b) == x && a.MatchesReservoir(s, 16) &&
           b.MatchesReservoir(s, 16);
  }));

  const FlowModel byte_model = ToyByteModel(4, seed);
  const FlowModel dequantizer = ToyDequantizer(4, seed + 1);
  out.push_back(Suite("dequant_roundtrip", 40, [&](size_t i) {
    CodecParams p;
    p.k_x = p.k_z = 20;
    p.sigma = 0x1.0p-12;
    const std::vector<uint8_t> bytes = SampleBytes(byte_model, 1, rng());
    const Indices x(bytes.begin(), bytes.end());
    const Dequantizer dq = i % 2 ? Dequantizer::ConditionalFlow(dequantizer)
                                 : Dequantizer::Uniform();
    const uint64_t s = DeriveSeed(seed, 3000 + i);
    AnsStream stream(s, 16);
    DequantEncode(x, 8, byte_model, dq, p, stream);
    return DequantDecode(4, 8, byte_model, dq, p, stream) == x &&
           stream.MatchesReservoir(s, 16);
  }));

  out.push_back(Suite("formats", 10, [&](size_t i) {
    const FlowModel m = ToyRealNvp(4, seed + i, {.context_dim = i % 2 ? 4u : 0u});
    if (SerializeModel(DeserializeModel(SerializeModel(m))) != SerializeModel(m)) {
      return false;
    }
    const Tensor t{DType::kU8, {3, 4}, SampleBytes(byte_model, 3, rng()), {}};
    const Tensor data = t;
    CodecParams p;
    p.k_x = p.k_z = 16;
    p.sigma = 0x1.0p-10;
    const auto archive = CompressArchive(byte_model, nullptr, data, 8, p, 1);
    return DeserializeTensor(SerializeTensor(t)) == t &&
           DecompressArchive(byte_model, nullptr, archive, 1) == data;
  }));
  return out;
}

}  // namespace lbb
