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

#include "lbb/gaussian.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

namespace lbb {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kMinGridStddev = 0x1.0p-20;
constexpr int64_t kMaxTableBins = int64_t{1} << 24;

// Mass of the standard normal on [a, b], computed so that the mirrored
// interval [-b, -a] goes through bit-identical arithmetic.
double IntervalMass(double a, double b) {
  if (a >= 0.0) return NormalSf(a) - NormalSf(b);
  if (b <= 0.0) return NormalSf(-b) - NormalSf(-a);
  return 1.0 - (NormalSf(-a) + NormalSf(b));
}

int64_t FloorDiv(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

double CheckedGridStddev(double stddev, int k) {
  if (!(stddev > 0.0) || !std::isfinite(stddev)) {
    Fail(ErrorCode::kDegenerateStddev, "stddev must be positive and finite");
  }
  const double s = std::ldexp(stddev, k);
  if (s < kMinGridStddev) {
    Fail(ErrorCode::kDegenerateStddev,
         "stddev " + std::to_string(stddev) + " is below 2^-20 bins at k=" +
             std::to_string(k));
  }
  return s;
}

void CheckGrid(int k) {
  if (k < 0 || k > kMaxGridPrecision) {
    Fail(ErrorCode::kInvalidArgument, "grid precision k out of range");
  }
}

}  // namespace

double NormalCdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
double NormalSf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double BinCenter(int64_t n, int k) {
  return std::ldexp(static_cast<double>(n) + 0.5, -k);
}

int64_t QuantizeScalar(double x, int k) {
  CheckGrid(k);
  const double scaled = std::floor(std::ldexp(x, k));
  if (!std::isfinite(scaled) || std::fabs(scaled) >= 0x1.0p52) {
    Fail(ErrorCode::kOverflow, "value " + std::to_string(x) +
                                   " does not fit the grid at k=" +
                                   std::to_string(k));
  }
  return static_cast<int64_t>(scaled);
}

GridPoint Quantize(std::span<const double> x, int k) {
  GridPoint g;
  g.k = k;
  g.indices.reserve(x.size());
  for (double v : x) g.indices.push_back(QuantizeScalar(v, k));
  return g;
}

double GridPoint::value(size_t i) const { return BinCenter(indices[i], k); }

std::vector<double> GridPoint::values() const {
  std::vector<double> out(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) out[i] = value(i);
  return out;
}

SymbolTable BuildTable(const GaussianBinSpec& spec) {
  CheckGrid(spec.k);
  if (spec.r < 1 || spec.r > kMaxPrecision) {
    Fail(ErrorCode::kInvalidArgument, "table precision out of range");
  }
  const double s = CheckedGridStddev(spec.stddev, spec.k);
  const double m = std::ldexp(spec.mean, spec.k);
  const double lo_edge = std::floor(m - spec.T * s);
  const double hi_edge = std::ceil(m + spec.T * s) - 1.0;
  if (!std::isfinite(lo_edge) || std::fabs(lo_edge) >= 0x1.0p52 ||
      std::fabs(hi_edge) >= 0x1.0p52) {
    Fail(ErrorCode::kOverflow, "support window does not fit the grid");
  }
  const auto lo = static_cast<int64_t>(lo_edge);
  const int64_t hi = std::max(lo, static_cast<int64_t>(hi_edge));
  const int64_t bins = hi - lo + 1;
  const uint64_t total = uint64_t{1} << spec.r;
  if (bins > kMaxTableBins || static_cast<uint64_t>(bins) > total) {
    Fail(ErrorCode::kWindowTooLarge,
         std::to_string(bins) + " bins cannot each get mass >= 1 at r=" +
             std::to_string(spec.r));
  }

  std::vector<double> mass(static_cast<size_t>(bins));
  double mass_sum = 0.0;
  for (int64_t i = 0; i < bins; ++i) {
    const auto n = static_cast<double>(lo + i);
    mass[i] = IntervalMass((n - m) / s, (n + 1.0 - m) / s);
    mass_sum += mass[i];
  }
  if (!(mass_sum > 0.0)) {
    Fail(ErrorCode::kOutOfSupport, "support window carries no mass");
  }

  std::vector<uint64_t> freq(mass.size());
  std::vector<double> remainder(mass.size());
  uint64_t assigned = 0;
  for (size_t i = 0; i < mass.size(); ++i) {
    const double ideal = mass[i] / mass_sum * static_cast<double>(total);
    const double whole = std::floor(ideal);
    if (whole < 1.0) {
      freq[i] = 1;
      remainder[i] = -1.0;  // raised to the floor; never gets a bonus unit
    } else {
      freq[i] = static_cast<uint64_t>(whole);
      remainder[i] = ideal - whole;
    }
    assigned += freq[i];
  }

  if (assigned < total) {
    std::vector<size_t> order(mass.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return remainder[a] > remainder[b];
    });
    uint64_t deficit = total - assigned;
    for (size_t i = 0; deficit > 0; i = (i + 1) % order.size(), --deficit) {
      ++freq[order[i]];
    }
  } else {
    for (uint64_t excess = assigned - total; excess > 0; --excess) {
      const auto largest = std::max_element(freq.begin(), freq.end());
      if (*largest <= 1) {
        Fail(ErrorCode::kWindowTooLarge, "cannot normalize table");
      }
      --*largest;
    }
  }
  return SymbolTable(spec.r, lo, std::move(freq));
}

GaussianBins::GaussianBins(const GaussianBinSpec& spec, int64_t min_index,
                           int64_t max_index, bool escape)
    : r_(spec.r), escape_(escape), min_index_(min_index), max_index_(max_index) {
  CheckGrid(spec.k);
  if (r_ < 4 || r_ > kMaxPrecision) {
    Fail(ErrorCode::kInvalidArgument, "coder precision must be in [4, 32]");
  }
  if (!std::isfinite(spec.mean)) {
    Fail(ErrorCode::kOutOfSupport, "non-finite mean");
  }
  stddev_grid_ = CheckedGridStddev(spec.stddev, spec.k);
  mean_grid_ = std::ldexp(spec.mean, spec.k);
  // At least ±T bins, so narrow Gaussians keep their neighbours at floor mass.
  const double half = std::max(spec.T * stddev_grid_, spec.T);
  const double lo_val = mean_grid_ - half;
  const double hi_val = mean_grid_ + half;
  if (std::fabs(lo_val) >= 0x1.0p52 || std::fabs(hi_val) >= 0x1.0p52) {
    Fail(ErrorCode::kOutOfSupport, "support window does not fit the grid");
  }
  if (min_index > max_index) {
    Fail(ErrorCode::kInvalidArgument, "empty index clip");
  }

  int j_max = kMaxPrecision;
  if (min_index != kNoMin && min_index != 0) {
    j_max = std::min(j_max, std::countr_zero(static_cast<uint64_t>(min_index)));
  }
  if (max_index != kNoMax && max_index + 1 != 0) {
    j_max = std::min(j_max,
                     std::countr_zero(static_cast<uint64_t>(max_index + 1)));
  }
  const int64_t cap = int64_t{1} << std::max(1, r_ / 2 - 2);
  for (int j = 0;; ++j) {
    const double width = std::ldexp(1.0, j);
    int64_t lo = static_cast<int64_t>(std::floor(lo_val / width));
    int64_t hi = static_cast<int64_t>(std::ceil(hi_val / width)) - 1;
    hi = std::max(hi, lo);
    const int64_t bucket = int64_t{1} << j;
    if (min_index != kNoMin) lo = std::max(lo, FloorDiv(min_index, bucket));
    if (max_index != kNoMax) hi = std::min(hi, FloorDiv(max_index, bucket));
    j_ = j;
    lo_ = lo;
    hi_ = hi;
    if (hi < lo || hi - lo + 1 <= cap || j >= j_max) break;
  }
  if (hi_ < lo_) {
    Fail(ErrorCode::kOutOfSupport, "support window lies outside the clip");
  }
  const int64_t count = hi_ - lo_ + 1;
  if (count > (int64_t{1} << (r_ - 2))) {
    Fail(ErrorCode::kWindowTooLarge,
         std::to_string(count) + " buckets at r=" + std::to_string(r_));
  }
  floor_ = std::max<uint64_t>(
      1, static_cast<uint64_t>(std::llround(std::ldexp(kFloorShare, r_) /
                                            static_cast<double>(count))));
  spread_ = (uint64_t{1} << r_) - (escape_ ? 1 : 0) -
            floor_ * static_cast<uint64_t>(count);

  const double width = std::ldexp(1.0, j_);
  const double e_lo = (static_cast<double>(lo_) * width - mean_grid_) /
                      stddev_grid_;
  const double e_hi = (static_cast<double>(hi_ + 1) * width - mean_grid_) /
                      stddev_grid_;
  upper_tail_ = e_lo + e_hi > 0.0;
  if (upper_tail_) {
    tail_lo_ = NormalSf(e_lo);
    tail_span_ = tail_lo_ - NormalSf(e_hi);
  } else {
    tail_lo_ = NormalCdf(e_lo);
    tail_span_ = NormalCdf(e_hi) - tail_lo_;
  }
  if (!(tail_span_ > 0.0)) {
    Fail(ErrorCode::kOutOfSupport, "support window carries no mass");
  }
}

double GaussianBins::WindowCdf(int64_t bucket) const {
  const double e = (std::ldexp(static_cast<double>(bucket), j_) - mean_grid_) /
                   stddev_grid_;
  const double f = upper_tail_ ? (tail_lo_ - NormalSf(e)) / tail_span_
                               : (NormalCdf(e) - tail_lo_) / tail_span_;
  return std::clamp(f, 0.0, 1.0);
}

uint64_t GaussianBins::Cum(int64_t bucket) const {
  if (bucket <= lo_) return 0;
  if (bucket > hi_) return (uint64_t{1} << r_) - (escape_ ? 1 : 0);
  const auto scaled = static_cast<uint64_t>(
      std::llround(WindowCdf(bucket) * static_cast<double>(spread_)));
  return std::min(scaled, spread_) +
         floor_ * static_cast<uint64_t>(bucket - lo_);
}

SymbolRange GaussianBins::Range(int64_t bucket) const {
  if (escape_ && bucket == hi_ + 1) return {(uint64_t{1} << r_) - 1, 1};
  if (bucket < lo_ || bucket > hi_) {
    Fail(ErrorCode::kOutOfSupport, "bucket outside support window");
  }
  const uint64_t start = Cum(bucket);
  return {start, Cum(bucket + 1) - start};
}

int64_t GaussianBins::Lookup(uint64_t slot, SymbolRange& range) const {
  if (escape_ && slot == (uint64_t{1} << r_) - 1) {
    range = {slot, 1};
    return hi_ + 1;
  }
  int64_t lo = lo_;
  int64_t hi = hi_;
  while (lo < hi) {
    const int64_t mid = lo + (hi - lo + 1) / 2;
    if (Cum(mid) <= slot) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  range = Range(lo);
  return lo;
}

void GaussianBins::Encode(AnsStream& stream, int64_t n) const {
  if (!Codable(n)) {
    Fail(ErrorCode::kOutOfSupport,
         "bin " + std::to_string(n) + " outside support [" +
             std::to_string(min_bin()) + ", " + std::to_string(max_bin()) + "]");
  }
  if (!Contains(n)) {
    const auto raw = static_cast<uint64_t>(n);
    stream.EncodeUniform(raw & 0xFFFFFFFFu, 32);
    stream.EncodeUniform(raw >> 32, 32);
    stream.Encode(*this, hi_ + 1);
    return;
  }
  const int64_t bucket = n >> j_;
  stream.EncodeUniform(static_cast<uint64_t>(n - (bucket << j_)), j_);
  stream.Encode(*this, bucket);
}

int64_t GaussianBins::Decode(AnsStream& stream) const {
  const int64_t bucket = stream.Decode(*this);
  if (escape_ && bucket == hi_ + 1) {
    const uint64_t high = stream.DecodeUniform(32);
    const uint64_t low = stream.DecodeUniform(32);
    const auto n = static_cast<int64_t>((high << 32) | low);
    if (Contains(n) || !Codable(n)) {
      Fail(ErrorCode::kOutOfSupport, "escaped bin " + std::to_string(n) +
                                         " is not a valid escape");
    }
    return n;
  }
  const auto offset = static_cast<int64_t>(stream.DecodeUniform(j_));
  return (bucket << j_) + offset;
}

double GaussianBins::CodeLength(int64_t n) const {
  if (!Codable(n)) {
    Fail(ErrorCode::kOutOfSupport, "bin outside support window");
  }
  if (!Contains(n)) return r_ + 64.0;
  const SymbolRange range = Range(n >> j_);
  return r_ - std::log2(static_cast<double>(range.freq)) + j_;
}

void EncodeGaussian(AnsStream& stream, const GaussianBinSpec& spec,
                    int64_t n) {
  const SymbolTable table = BuildTable(spec);
  if (n < table.min_symbol() || n > table.max_symbol()) {
    Fail(ErrorCode::kOutOfSupport, "bin outside support window");
  }
  stream.Encode(table, n);
}

int64_t DecodeGaussian(AnsStream& stream, const GaussianBinSpec& spec) {
  return stream.Decode(BuildTable(spec));
}

}  // namespace lbb
