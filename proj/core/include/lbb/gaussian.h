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

#ifndef LBB_GAUSSIAN_H_
#define LBB_GAUSSIAN_H_

// Fixed-point grids and discretized Gaussian coding.
//
// A grid of precision k has bins [n 2^-k, (n+1) 2^-k) for signed n; a point is
// represented by its bin index and stands for the bin center (n + 1/2) 2^-k.
// Bin masses are exact differences of the normal CDF over bin edges.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "lbb/ans.h"

namespace lbb {

inline constexpr int kMaxGridPrecision = 40;
// Bin indices must stay exactly representable as doubles.
inline constexpr int kMaxIndexBits = 52;

// Share of a GaussianBins table spread uniformly over its window.
inline constexpr double kFloorShare = 0x1.0p-10;

struct GridPoint {
  std::vector<int64_t> indices;
  int k = 0;

  size_t size() const { return indices.size(); }
  double value(size_t i) const;
  std::vector<double> values() const;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Bin center of index n at precision k.
double BinCenter(int64_t n, int k);
// floor(x 2^k); throws Overflow when |x 2^k| >= 2^52.
int64_t QuantizeScalar(double x, int k);
GridPoint Quantize(std::span<const double> x, int k);

// Standard normal CDF and upper tail, both accurate in the far tails.
double NormalCdf(double x);
double NormalSf(double x);

struct GaussianBinSpec {
  double mean = 0.0;
  double stddev = 1.0;
  int k = 0;          // bin width 2^-k
  int r = 16;         // table precision: masses sum to 2^r
  double T = 16.0;    // support half-width in stddevs (GaussianBins: and >= T bins)
};

// Materialized table over every bin intersecting [mean - T s, mean + T s].
// Masses are normalized to exactly 2^r by largest-remainder rounding (ties by
// ascending index); bins below mass 1 are raised to 1, the excess taken one
// unit at a time from the currently largest bin.
SymbolTable BuildTable(const GaussianBinSpec& spec);

// Lazily evaluated discretized Gaussian used by the codecs.
//
// Bins are grouped into aligned buckets of 2^j bins, with j the smallest
// value keeping the support window at or below 2^(r/2 - 2) buckets. A bin is
// coded as its bucket under a quantized CDF followed by its offset inside the
// bucket as j uniform bits. Cumulative bucket masses are
//
//   C(c) = round(F(c) M) + U (c - lo),   U = max(1, round(ρ 2^r / W)),
//   M = 2^r - U W,
//
// where F is the normal CDF renormalized to the window, W the bucket count
// and ρ = kFloorShare. The U term spreads a share ρ of the mass evenly over
// the window's bins. Windows span the same number of stddevs wherever a
// value is drawn and coded, so tail bins cost the same per stddev on both
// sides of a bits-back pair.
// An optional index clip [min_index, max_index] restricts the support; the
// bucket size is then capped so the clip falls on bucket boundaries.
//
// With `escape` set, the top slot of the range is an escape symbol of mass 1
// and bins outside the window are coded as the escape followed by the raw
// 64-bit index. Only for values the encoder knows: decoding fresh reservoir
// bits must never land there.
class GaussianBins {
 public:
  static constexpr int64_t kNoMin = std::numeric_limits<int64_t>::min();
  static constexpr int64_t kNoMax = std::numeric_limits<int64_t>::max();

  explicit GaussianBins(const GaussianBinSpec& spec, int64_t min_index = kNoMin,
                        int64_t max_index = kNoMax, bool escape = false);

  int precision() const { return r_; }
  int bucket_bits() const { return j_; }
  int64_t min_bin() const { return lo_ << j_; }
  int64_t max_bin() const { return ((hi_ + 1) << j_) - 1; }
  bool Contains(int64_t n) const { return n >= min_bin() && n <= max_bin(); }
  // Whether Encode accepts n: inside the window, or inside the clip when
  // escapes are enabled.
  bool Codable(int64_t n) const {
    return Contains(n) || (escape_ && n >= min_index_ && n <= max_index_);
  }

  // Coarse bucket distribution, usable directly with AnsStream.
  SymbolRange Range(int64_t bucket) const;
  int64_t Lookup(uint64_t slot, SymbolRange& range) const;

  void Encode(AnsStream& stream, int64_t n) const;
  int64_t Decode(AnsStream& stream) const;

  // Exact code length of bin n in bits (r + 64 for an escaped bin).
  double CodeLength(int64_t n) const;

 private:
  uint64_t Cum(int64_t bucket) const;
  double WindowCdf(int64_t bucket) const;

  int r_;
  int j_ = 0;
  double mean_grid_;    // mean in bin units
  double stddev_grid_;  // stddev in bin units
  int64_t lo_ = 0;      // first bucket
  int64_t hi_ = 0;      // last bucket
  uint64_t spread_ = 0; // M above
  uint64_t floor_ = 1;  // U above
  bool upper_tail_ = false;
  double tail_lo_ = 0.0;
  double tail_span_ = 1.0;
  bool escape_ = false;
  int64_t min_index_ = kNoMin;
  int64_t max_index_ = kNoMax;
};

// Exact-table coding with BuildTable(spec); the codecs use GaussianBins.
void EncodeGaussian(AnsStream& stream, const GaussianBinSpec& spec, int64_t n);
int64_t DecodeGaussian(AnsStream& stream, const GaussianBinSpec& spec);

}  // namespace lbb

#endif  // LBB_GAUSSIAN_H_
