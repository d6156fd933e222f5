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


// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every line passes. Reads the checked-in fixtures from the directory given
// as argv[1] (default: the source tree's tests/fixtures); further arguments
// select criteria by name.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "lbb/ar.h"
#include "lbb/archive.h"
#include "lbb/codec.h"
#include "lbb/dequant.h"
#include "lbb/harness.h"
#include "lbb/io.h"
#include "lbb/random.h"
#include "lbb/toy.h"

namespace {

namespace fs = std::filesystem;
using lbb::AnsStream;
using lbb::CodecParams;
using lbb::FlowModel;
using lbb::GridPoint;
using lbb::Tensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::vector<double> Row(const Tensor& t, size_t i) {
  const size_t d = t.shape[1];
  return {t.f64.begin() + i * d, t.f64.begin() + (i + 1) * d};
}

lbb::Indices ByteRow(const Tensor& t, size_t i) {
  const size_t d = t.shape[1];
  return {t.u8.begin() + i * d, t.u8.begin() + (i + 1) * d};
}

struct Fixtures {
  explicit Fixtures(const fs::path& dir)
      : composite16(lbb::LoadWeights(dir / "composite16.lbbw")),
        composite64(lbb::LoadWeights(dir / "composite64.lbbw")),
        composite256(lbb::LoadWeights(dir / "composite256.lbbw")),
        nonlinear2(lbb::LoadWeights(dir / "nonlinear2.lbbw")),
        ar4(lbb::LoadWeights(dir / "ar4.lbbw")),
        byte8(lbb::LoadWeights(dir / "byte8.lbbw")),
        dequant8(lbb::LoadWeights(dir / "dequant8.lbbw")),
        composite16_points(lbb::LoadTensor(dir / "composite16_points.lbbt")),
        nonlinear2_points(lbb::LoadTensor(dir / "nonlinear2_points.lbbt")),
        byte8_data(lbb::LoadTensor(dir / "byte8_data.lbbt")) {}
  FlowModel composite16, composite64, composite256, nonlinear2, ar4, byte8,
      dequant8;
  Tensor composite16_points, nonlinear2_points, byte8_data;
};

// Mean of (net bits - theoretical bits) / d for the compositional codec.
struct CodecExcess {
  double net = 0.0;
  double theory = 0.0;
  double excess() const { return net - theory; }
};

CodecExcess MeasureCompositional(const FlowModel& model, const Tensor& points,
                                 size_t n, const CodecParams& params) {
  const double d = double(model.dim());
  CodecExcess out;
  for (size_t i = 0; i < n; ++i) {
    const GridPoint x = lbb::Quantize(Row(points, i), params.k_x);
    AnsStream stream(lbb::DeriveSeed(params.seed, i));
    lbb::CompositionalEncode(model, x, params, stream);
    out.net += stream.net_bits() / d;
    out.theory += lbb::TheoreticalBits(model, x) / d;
  }
  out.net /= double(n);
  out.theory /= double(n);
  return out;
}

Outcome Losslessness(const Fixtures& f) {
  constexpr size_t kCases = 10000;
  const FlowModel* continuous[] = {&f.composite16, &f.nonlinear2, &f.ar4};
  const int kTableBits[] = {16, 20, 24, 28, 32};
  const double kSupport[] = {8.0, 12.0, 16.0};
  size_t exact = 0;
  std::string first_failure;
  for (size_t i = 0; i < kCases; ++i) {
    lbb::Xoshiro256 rng(lbb::DeriveSeed(0xACCE55, i));
    CodecParams p;
    p.k_x = p.k_z = 12 + static_cast<int>(rng() % 21);
    p.sigma = std::ldexp(1.0, -static_cast<int>(4 + rng() % (p.k_x - 3)));
    p.r = kTableBits[rng() % 5];
    p.T = kSupport[rng() % 3];
    p.seed = rng();
    p.aux_words = rng() % 65;
    const int codec = static_cast<int>(rng() % 4);
    try {
      AnsStream tx(p.seed, p.aux_words);
      std::function<bool(AnsStream&)> check;
      if (codec < 2) {
        const FlowModel& m = *continuous[rng() % 3];
        const GridPoint x = lbb::Quantize(lbb::SampleFlow(m, rng), p.k_x);
        if (codec == 0) {
          lbb::CompositionalEncode(m, x, p, tx);
          check = [&, x](AnsStream& rx) {
            return lbb::CompositionalDecode(m, p, rx) == x;
          };
        } else {
          lbb::BlackboxEncode(m, x, p, tx);
          check = [&, x](AnsStream& rx) {
            return lbb::BlackboxDecode(m, p, rx) == x;
          };
        }
      } else {
        const auto dq = codec == 2 ? lbb::Dequantizer::Uniform()
                                   : lbb::Dequantizer::ConditionalFlow(f.dequant8);
        const lbb::Indices x = ByteRow(f.byte8_data, rng() % f.byte8_data.shape[0]);
        lbb::DequantEncode(x, 8, f.byte8, dq, p, tx);
        check = [&, x, dq](AnsStream& rx) {
          return lbb::DequantDecode(8, 8, f.byte8, dq, p, rx) == x;
        };
      }
      // The receiver sees only the flushed bytes.
      AnsStream rx = AnsStream::FromBytes(tx.Flush());
      if (check(rx) && rx.MatchesReservoir(p.seed, p.aux_words)) {
        ++exact;
      } else if (first_failure.empty()) {
        first_failure = Format("case %zu: mismatch", i);
      }
    } catch (const std::exception& e) {
      if (first_failure.empty()) first_failure = Format("case %zu: %s", i, e.what());
    }
  }
  Outcome o;
  o.pass = exact == kCases;
  o.detail = Format("%zu/%zu exact with reservoir restored", exact, kCases);
  if (!first_failure.empty()) o.detail += "; first failure " + first_failure;
  return o;
}

Outcome CodelengthAccuracy(const Fixtures& f) {
  CodecParams p;
  p.k_x = p.k_z = 24;
  p.sigma = 0x1.0p-12;
  p.seed = 1;
  const CodecExcess e = MeasureCompositional(f.composite16, f.composite16_points, 500, p);
  Outcome o;
  o.pass = std::fabs(e.excess()) <= 0.05;
  o.detail = Format("d=16 depth=%zu: net %.4f vs theory %.4f bits/dim (diff %+.4f)",
                    f.composite16.layers().size(), e.net, e.theory, e.excess());
  return o;
}

Outcome SigmaScaling(const Fixtures& f) {
  // 10^6 paired samples spread over the first 1000 data points; both σ share
  // each point's ε sequence.
  constexpr size_t kPoints = 1000;
  double g6 = 0.0, g8 = 0.0;
  for (size_t i = 0; i < kPoints; ++i) {
    const std::vector<double> x = Row(f.nonlinear2_points, i);
    const uint64_t seed = lbb::DeriveSeed(7, i);
    g6 += lbb::EstimateLogdetGap(f.nonlinear2, x, 0x1.0p-6, 1000, seed).excess;
    g8 += lbb::EstimateLogdetGap(f.nonlinear2, x, 0x1.0p-8, 1000, seed).excess;
  }
  g6 /= double(kPoints);
  g8 /= double(kPoints);
  const double ratio = std::fabs(g6) / std::fabs(g8);

  CodecParams p;
  p.k_x = p.k_z = 24;
  p.seed = 3;
  p.sigma = 0x1.0p-6;
  const double c6 = MeasureCompositional(f.nonlinear2, f.nonlinear2_points, 20000, p).excess();
  p.sigma = 0x1.0p-8;
  const double c8 = MeasureCompositional(f.nonlinear2, f.nonlinear2_points, 20000, p).excess();
  const double floor = 0x1.0p-12;

  Outcome o;
  o.pass = ratio >= 8.0 && ratio <= 32.0 && (c8 <= c6 / 4.0 || std::fabs(c8) <= floor);
  o.detail = Format(
      "mean logdet gap excess %.3e -> %.3e nats (ratio %.2f); codec excess "
      "%.5f -> %.5f bits/dim (x%.1f)",
      g6, g8, ratio, c6, c8, c6 / c8);
  return o;
}

Outcome BlackboxVsCompositional(const Fixtures& f) {
  CodecParams p;
  p.k_x = p.k_z = 24;
  p.sigma = 0x1.0p-12;
  const FlowModel* models[] = {&f.composite16, &f.composite64, &f.composite256};
  std::vector<double> dims, bb, cc;
  double worst_gap = 0.0;
  for (const FlowModel* m : models) {
    const lbb::BenchRow row = lbb::BenchDimension(*m, p, 20, 5);
    dims.push_back(double(row.dim));
    bb.push_back(row.blackbox_encode.mean + row.blackbox_decode.mean);
    cc.push_back(row.compositional_encode.mean + row.compositional_decode.mean);
    worst_gap = std::max(worst_gap, std::fabs(row.blackbox_bits_per_dim -
                                              row.compositional_bits_per_dim));
  }
  const double bb_slope = lbb::LogLogSlope(dims, bb);
  const double cc_slope = lbb::LogLogSlope(dims, cc);
  Outcome o;
  o.pass = worst_gap <= 0.05 && bb_slope >= 2.0 && cc_slope <= 1.3;
  o.detail = Format("max mean gap %.4f bits/dim; slopes blackbox %.2f, compositional %.2f",
                    worst_gap, bb_slope, cc_slope);
  return o;
}

Outcome PhaseTransition(const Fixtures& f) {
  const int ks[] = {8, 10, 12, 14, 16, 18, 20, 24, 28};
  const int sigma_exps[] = {12, 13, 14, 15, 16};
  bool blowup = true, monotone = true, failures = false;
  double min_ratio = 1e300, plateau_lo = 1e300, plateau_hi = -1e300;
  for (int e : sigma_exps) {
    std::vector<lbb::SweepCell> cells;
    for (int k : ks) {
      CodecParams p;
      p.k_x = p.k_z = k;
      p.sigma = std::ldexp(1.0, -e);
      cells.push_back(lbb::RunSweepCell(f.byte8, nullptr, f.byte8_data, 8, p, 5, 200, 1));
      failures = failures || !cells.back().ok();
    }
    const double plateau = cells.back().mean;
    plateau_lo = std::min(plateau_lo, plateau);
    plateau_hi = std::max(plateau_hi, plateau);
    for (size_t j = 0; j < cells.size(); ++j) {
      if (j > 0 && !(cells[j].aux_mean > cells[j - 1].aux_mean)) monotone = false;
      if (ks[j] <= e) {
        const double ratio = cells[j].mean / plateau;
        min_ratio = std::min(min_ratio, ratio);
        blowup = blowup && ratio >= 10.0;
      }
    }
  }
  Outcome o;
  o.pass = blowup && monotone && !failures && plateau_hi - plateau_lo < 0.01;
  o.detail = Format(
      "min blow-up %.1fx over cells with 2^-k >= sigma; k=28 plateau %.4f..%.4f "
      "(spread %.4f); aux %s in k%s",
      min_ratio, plateau_lo, plateau_hi, plateau_hi - plateau_lo,
      monotone ? "strictly increasing" : "NOT increasing",
      failures ? "; some cells failed" : "");
  return o;
}

// Dense N(0, JJᵀ) log density in long double.
double DenseLogDensity(const lbb::Matrix& j, const std::vector<double>& y) {
  using M = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using V = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const auto d = static_cast<Eigen::Index>(y.size());
  M jm(d, d);
  V yv(d);
  for (Eigen::Index r = 0; r < d; ++r) {
    yv(r) = y[r];
    for (Eigen::Index c = 0; c < d; ++c) jm(r, c) = j(r, c);
  }
  // yᵀ(JJᵀ)⁻¹y = |J⁻¹y|², log det JJᵀ = 2 log|det J|.
  const Eigen::PartialPivLU<M> lu(jm);
  const V w = lu.solve(yv);
  long double log_det = 0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(std::fabs(lu.matrixLU()(i, i)));
  return static_cast<double>(-0.5L * w.squaredNorm() - log_det -
                             0.5L * d * std::log(2.0L * std::numbers::pi_v<long double>));
}

Outcome GaussianToAr() {
  lbb::Xoshiro256 rng(2026);
  double worst = 0.0;
  size_t agree = 0, total = 0;
  for (size_t d : {4u, 8u}) {
    for (size_t t = 0; t < 100; ++t, ++total) {
      lbb::Matrix j(d, d);
      for (double& v : j.data()) v = rng.Normal();
      std::vector<double> e(d);
      for (double& v : e) v = rng.Normal();
      const std::vector<double> y = j * e;
      const double err =
          std::fabs(lbb::GaussianToAr(j).LogDensity(y) - DenseLogDensity(j, y));
      worst = std::max(worst, err);
      if (err <= 1e-8) ++agree;
    }
  }
  Outcome o;
  o.pass = agree == total;
  o.detail = Format("%zu/%zu Jacobians (4x4, 8x8) agree; worst |diff| %.2e nats",
                    agree, total, worst);
  return o;
}

Outcome Dequantization(const Fixtures& f) {
  CodecParams p;  // k=32, σ=2^-14
  lbb::CompressReport report;
  const auto archive =
      lbb::CompressArchive(f.byte8, nullptr, f.byte8_data, 8, p, 1, &report);
  const Tensor back = lbb::DecompressArchive(f.byte8, nullptr, archive, 1);
  const bool exact = back == f.byte8_data;
  const lbb::EvalResult bound =
      lbb::Evaluate(f.byte8, nullptr, f.byte8_data, 8, p.k_x, 64, 11);
  const double net = report.MeanNetBitsPerDim();
  Outcome o;
  o.pass = exact && std::fabs(net - bound.bits_per_dim) <= 0.05;
  o.detail = Format("%zu vectors %s; net %.4f vs Monte-Carlo bound %.4f ± %.4f bits/dim",
                    size_t(f.byte8_data.shape[0]),
                    exact ? "round-trip exactly" : "DID NOT round-trip", net,
                    bound.bits_per_dim, bound.stderr_bits);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path(LBB_FIXTURE_DIR);
  const Fixtures fixtures(dir);

  struct Criterion {
    const char* name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"losslessness", 300, [&] { return Losslessness(fixtures); }},
      {"codelength_accuracy", 60, [&] { return CodelengthAccuracy(fixtures); }},
      {"sigma_squared_scaling", 300, [&] { return SigmaScaling(fixtures); }},
      {"blackbox_vs_compositional", 600, [&] { return BlackboxVsCompositional(fixtures); }},
      {"phase_transition", 0, [&] { return PhaseTransition(fixtures); }},
      {"gaussian_to_ar", 0, [] { return GaussianToAr(); }},
      {"dequantization", 0, [&] { return Dequantization(fixtures); }},
  };

  const std::vector<std::string> only(argv + std::min(argc, 2), argv + argc);
  bool all = true;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o.pass = false;
      o.detail += Format("; over time limit %.0fs", c.limit_seconds);
    }
    std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
