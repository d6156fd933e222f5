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

// lbb: compress, decompress and evaluate data with local bits-back coding.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lbb/archive.h"
#include "lbb/codec.h"
#include "lbb/error.h"
#include "lbb/harness.h"
#include "lbb/io.h"
#include "lbb/random.h"
#include "lbb/toy.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCodec = 2;

struct ParamFlags {
  int kx = 32;
  std::optional<int> kz;  // defaults to kx
  std::string sigma = "2^-14";
  int table_bits = 24;
  double support = 16.0;
  uint64_t seed = 0;
  size_t aux_words = 0;
  size_t threads = 1;

  void Register(CLI::App* app) {
    app->add_option("--kx", kx, "Data grid precision k_x (bin width 2^-k)");
    app->add_option("--kz", kz, "Latent grid precision k_z (must equal k_x; default k_x)");
    app->add_option("--sigma", sigma, "Noise scale, e.g. 2^-14 or 0.001");
    app->add_option("--table-bits", table_bits, "Coder table precision r");
    app->add_option("--support", support, "Support half-width T in stddevs");
    app->add_option("--seed", seed, "Reservoir seed");
    app->add_option("--aux-words", aux_words, "Initial reservoir size in 32-bit words");
    app->add_option("--batch-threads", threads, "Worker threads");
  }

  lbb::CodecParams Params() const {
    lbb::CodecParams p;
    p.k_x = kx;
    p.k_z = kz.value_or(kx);
    p.sigma = lbb::ParseSigma(sigma);
    p.r = table_bits;
    p.T = support;
    p.seed = seed;
    p.aux_words = aux_words;
    p.Validate();
    return p;
  }
};

struct Models {
  lbb::FlowModel model;
  std::optional<lbb::FlowModel> dequantizer;

  const lbb::FlowModel* dq() const {
    return dequantizer ? &*dequantizer : nullptr;
  }
};

Models LoadModels(const std::string& model_path, const std::string& dq_path) {
  Models m{lbb::LoadWeights(model_path), std::nullopt};
  if (!dq_path.empty()) m.dequantizer = lbb::LoadWeights(dq_path);
  return m;
}

std::string FormatSigma(double sigma) {
  int e = 0;
  char buf[64];
  if (std::frexp(sigma, &e) == 0.5) {
    std::snprintf(buf, sizeof buf, "2^%d (%.9g)", e - 1, sigma);
  } else {
    std::snprintf(buf, sizeof buf, "%.9g", sigma);
  }
  return buf;
}

void EchoParams(const lbb::CodecParams& p) {
  std::printf("params: kx=%d kz=%d sigma=%s table_bits=%d support=%g seed=%llu "
              "aux_words=%zu\n",
              p.k_x, p.k_z, FormatSigma(p.sigma).c_str(), p.r, p.T,
              static_cast<unsigned long long>(p.seed), p.aux_words);
  if (!p.WellConditioned()) {
    std::fprintf(stderr, "warning: sigma * 2^k < 4; codelengths will degrade\n");
  }
}

std::vector<double> ParseSigmaList(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) out.push_back(lbb::ParseSigma(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local bits-back coding for normalizing flows"};
  app.require_subcommand(1);

  std::string model_path, dq_path, input, output;
  ParamFlags flags;
  int bit_depth = 8;

  auto* compress = app.add_subcommand("compress", "Compress a u8 LBBT tensor");
  compress->add_option("--model", model_path, "LBBW density model")->required();
  compress->add_option("--dequant", dq_path, "LBBW conditional dequantizer");
  compress->add_option("--input", input, "Input .lbbt")->required();
  compress->add_option("--output", output, "Output .lbba")->required();
  compress->add_option("--bit-depth", bit_depth, "Bit depth of the input");
  compress->add_flag("--per-item", "Print one line per item");
  flags.Register(compress);

  size_t threads = 1;
  auto* decompress = app.add_subcommand("decompress", "Decompress an LBBA archive");
  decompress->add_option("--model", model_path, "LBBW density model")->required();
  decompress->add_option("--dequant", dq_path, "LBBW conditional dequantizer");
  decompress->add_option("--input", input, "Input .lbba")->required();
  decompress->add_option("--output", output, "Output .lbbt")->required();
  decompress->add_option("--batch-threads", threads, "Worker threads");

  size_t samples = 64;
  auto* eval = app.add_subcommand("eval", "Theoretical codelength in bits/dim");
  eval->add_option("--model", model_path, "LBBW density model")->required();
  eval->add_option("--dequant", dq_path, "LBBW conditional dequantizer");
  eval->add_option("--input", input, "Input .lbbt (u8 or f64)")->required();
  eval->add_option("--samples", samples, "Monte-Carlo samples per item");
  eval->add_option("--bit-depth", bit_depth, "Bit depth of u8 input");
  eval->add_option("--kx", flags.kx, "Grid precision for f64 input");
  eval->add_option("--seed", flags.seed, "Sampling seed");

  std::vector<int> k_list;
  std::vector<std::string> sigma_list;
  size_t seeds = 5, items = 20;
  auto* sweep = app.add_subcommand("sweep", "Codelength over a (k, sigma) grid");
  sweep->add_option("--model", model_path, "LBBW density model")->required();
  sweep->add_option("--dequant", dq_path, "LBBW conditional dequantizer");
  sweep->add_option("--input", input, "Input u8 .lbbt")->required();
  sweep->add_option("--output", output, "Output CSV")->required();
  sweep->add_option("--k-list", k_list, "Grid precisions")->required()->delimiter(',');
  sweep->add_option("--sigma-list", sigma_list, "Noise scales")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "Reservoir seeds per cell");
  sweep->add_option("--items", items, "Items per seed");
  sweep->add_option("--bit-depth", bit_depth, "Bit depth of the input");
  flags.Register(sweep);

  std::vector<size_t> d_list = {16, 64, 256};
  size_t reps = 5;
  auto* bench = app.add_subcommand("bench", "Black-box vs compositional timing");
  bench->add_option("--model", model_path, "LBBW model (default: toy flow per d)");
  bench->add_option("--d-list", d_list, "Dimensions for toy flows")->delimiter(',');
  bench->add_option("--reps", reps, "Datapoints per dimension");
  flags.Register(bench);

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant suites");

  std::string kind = "realnvp";
  size_t dim = 16, couplings = 4, block = 4, hidden = lbb::kToyHidden, count = 100;
  double spread = 4.0, squeeze = 1.0, out_scale = 0.3;
  auto* toy = app.add_subcommand("toy-model", "Write a randomly initialized flow");
  toy->add_option("--kind", kind, "realnvp | autoregressive | byte | dequantizer | identity")
      ->check(CLI::IsMember({"realnvp", "autoregressive", "byte", "dequantizer", "identity"}));
  toy->add_option("--dim", dim, "Dimension");
  toy->add_option("--seed", flags.seed, "Initialization seed");
  toy->add_option("--couplings", couplings, "Coupling layers");
  toy->add_option("--block", block, "DenseLinear block size (realnvp; 0 drops it)");
  toy->add_option("--out-scale", out_scale, "Conditioner output scale");
  toy->add_option("--hidden", hidden, "Conditioner width (realnvp)");
  toy->add_option("--spread", spread, "Data spread (byte)");
  toy->add_option("--squeeze", squeeze, "Alternating ActNorm scale (byte)");
  toy->add_option("--output", output, "Output .lbbw")->required();

  bool continuous = false;
  auto* toy_data = app.add_subcommand("toy-data", "Sample a dataset from a flow");
  toy_data->add_option("--model", model_path, "LBBW model")->required();
  toy_data->add_option("--count", count, "Number of items");
  toy_data->add_option("--seed", flags.seed, "Sampling seed");
  toy_data->add_flag("--continuous", continuous, "Write f64 samples instead of bytes");
  toy_data->add_option("--output", output, "Output .lbbt")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*compress) {
      const lbb::CodecParams p = flags.Params();
      const Models m = LoadModels(model_path, dq_path);
      const lbb::Tensor data = lbb::LoadTensor(input);
      EchoParams(p);
      lbb::CompressReport report;
      const auto archive =
          lbb::CompressArchive(m.model, m.dq(), data, bit_depth, p, flags.threads, &report);
      lbb::WriteFile(output, archive);
      if (compress->count("--per-item")) {
        for (size_t i = 0; i < report.items.size(); ++i) {
          std::printf("item %zu: net_bits_per_dim=%.6f peak_aux_bits_per_dim=%.6f\n", i,
                      report.items[i].net_bits / double(report.dim),
                      report.items[i].peak_aux_bits / double(report.dim));
        }
      }
      std::printf("items: %zu\n", report.items.size());
      std::printf("net_bits_per_dim: %.6f\n", report.MeanNetBitsPerDim());
      std::printf("peak_aux_bits_per_dim: %.6f\n", report.MeanPeakAuxBitsPerDim());
      std::printf("archive_bytes: %zu\n", report.archive_bytes);
      std::printf("seconds: %.3f\n", report.seconds);
    } else if (*decompress) {
      const Models m = LoadModels(model_path, dq_path);
      lbb::DecompressReport report;
      const lbb::Tensor out =
          lbb::DecompressArchive(m.model, m.dq(), lbb::ReadFile(input), threads, &report);
      lbb::SaveTensor(out, output);
      std::printf("items: %zu\n", report.items);
      std::printf("reservoir_verified: %s\n", report.reservoir_verified ? "yes" : "no");
      std::printf("seconds: %.3f\n", report.seconds);
    } else if (*eval) {
      const Models m = LoadModels(model_path, dq_path);
      const lbb::EvalResult r = lbb::Evaluate(m.model, m.dq(), lbb::LoadTensor(input),
                                              bit_depth, flags.kx, samples, flags.seed);
      std::printf("items: %zu\n", r.items);
      std::printf("objective: %s\n", r.integer_data ? "dequantization bound" : "continuous");
      std::printf("bits_per_dim: %.6f\n", r.bits_per_dim);
      std::printf("stderr: %.6f\n", r.stderr_bits);
    } else if (*sweep) {
      lbb::CodecParams base = flags.Params();
      const Models m = LoadModels(model_path, dq_path);
      const lbb::Tensor data = lbb::LoadTensor(input);
      const auto sigmas = ParseSigmaList(sigma_list);
      std::ofstream csv(output);
      if (!csv) lbb::Fail(lbb::ErrorCode::kIo, "cannot write " + output);
      csv << lbb::SweepCsvHeader() << "\n";
      std::printf("%s\n", lbb::SweepCsvHeader().c_str());
      for (double sigma : sigmas) {
        for (int k : k_list) {
          lbb::CodecParams p = base;
          p.k_x = p.k_z = k;
          p.sigma = sigma;
          const auto cell = lbb::RunSweepCell(m.model, m.dq(), data, bit_depth, p,
                                              seeds, items, flags.threads);
          const std::string row = lbb::SweepCsvRow(cell);
          csv << row << "\n";
          std::printf("%s\n", row.c_str());
        }
      }
    } else if (*bench) {
      const lbb::CodecParams p = flags.Params();
      std::optional<lbb::FlowModel> fixed;
      if (!model_path.empty()) {
        fixed = lbb::LoadWeights(model_path);
        d_list = {fixed->dim()};
      }
      std::vector<double> ds, bb, cc;
      std::printf("d,blackbox_encode_s,blackbox_encode_std,blackbox_decode_s,"
                  "compositional_encode_s,compositional_encode_std,"
                  "compositional_decode_s,blackbox_bits,compositional_bits,"
                  "theoretical_bits\n");
      for (size_t d : d_list) {
        const lbb::FlowModel model = fixed ? *fixed : lbb::ToyRealNvp(d, flags.seed + 1);
        const auto row = lbb::BenchDimension(model, p, reps, flags.seed);
        std::printf("%zu,%.6g,%.3g,%.6g,%.6g,%.3g,%.6g,%.4f,%.4f,%.4f\n", d,
                    row.blackbox_encode.mean, row.blackbox_encode.stddev,
                    row.blackbox_decode.mean, row.compositional_encode.mean,
                    row.compositional_encode.stddev, row.compositional_decode.mean,
                    row.blackbox_bits_per_dim, row.compositional_bits_per_dim,
                    row.theoretical_bits_per_dim);
        ds.push_back(double(d));
        bb.push_back(row.blackbox_encode.mean + row.blackbox_decode.mean);
        cc.push_back(row.compositional_encode.mean + row.compositional_decode.mean);
      }
      if (ds.size() >= 2) {
        std::printf("blackbox_slope: %.3f\n", lbb::LogLogSlope(ds, bb));
        std::printf("compositional_slope: %.3f\n", lbb::LogLogSlope(ds, cc));
      }
    } else if (*selftest) {
      bool all = true;
      for (const auto& s : lbb::RunSelfTest()) {
        std::printf("%-20s %zu/%zu\n", s.name.c_str(), s.passed, s.total);
        all = all && s.passed == s.total;
      }
      std::printf("%s\n", all ? "PASS" : "FAIL");
      return all ? kExitOk : kExitCodec;
    } else if (*toy) {
      lbb::FlowModel model;
      if (kind == "realnvp") {
        model = lbb::ToyRealNvp(dim, flags.seed,
                                {.couplings = couplings,
                                 .block = block,
                                 .out_scale = out_scale,
                                 .hidden = hidden});
      } else if (kind == "autoregressive") {
        model = lbb::ToyAutoregressive(dim, flags.seed, out_scale);
      } else if (kind == "byte") {
        model = lbb::ToyByteModel(dim, flags.seed,
                                  {.spread = spread, .couplings = couplings, .squeeze = squeeze});
      } else if (kind == "dequantizer") {
        model = lbb::ToyDequantizer(dim, flags.seed);
      } else {
        model = lbb::FlowModel(dim, {});
      }
      lbb::SaveWeights(model, output);
      std::printf("layers: %zu\nhash: %016llx\n", model.layers().size(),
                  static_cast<unsigned long long>(lbb::ModelHash(model)));
    } else if (*toy_data) {
      const lbb::FlowModel model = lbb::LoadWeights(model_path);
      lbb::Tensor t;
      t.shape = {count, model.dim()};
      if (continuous) {
        t.dtype = lbb::DType::kF64;
        lbb::Xoshiro256 rng(flags.seed);
        for (size_t i = 0; i < count; ++i) {
          for (double v : lbb::SampleFlow(model, rng)) t.f64.push_back(v);
        }
      } else {
        t.u8 = lbb::SampleBytes(model, count, flags.seed);
      }
      lbb::SaveTensor(t, output);
      std::printf("items: %zu\n", count);
    }
  } catch (const lbb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == lbb::ErrorCode::kInvalidArgument ? kExitUsage : kExitCodec;
  }
  return kExitOk;
}
