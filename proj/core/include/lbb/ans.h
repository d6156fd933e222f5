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

#ifndef LBB_ANS_H_
#define LBB_ANS_H_

// Stack-based rANS coder with a 64-bit state and 32-bit renormalization.
//
// The state x lives in [2^32, 2^64). Encoding a symbol with cumulative start
// c and frequency f at precision r maps
//
//   x -> floor(x / f) * 2^r + (x mod f) + c
//
// after first emitting the low 32 bits of x when x >= 2^(64-r) * f. Decoding
// is the exact inverse; when the state drops below 2^32 a word is popped. An
// empty word stack is backstopped by a seeded xoshiro256** reservoir so that
// bits-back "decode before encode" always succeeds in lenient mode.
//
// Bit accounting: total_bits() = log2(state) + 32 * |words|. The state term is
// fractional, so the codelength of every single operation is measured exactly
// rather than rounded to whole bits. The wire format (Flush) stores the full
// 64-bit state: 8 bytes little endian, then the words little endian, stack
// bottom first.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lbb/error.h"
#include "lbb/random.h"

namespace lbb {

inline constexpr int kMaxPrecision = 32;

// Half-open slot interval [start, start + freq) inside [0, 2^precision).
struct SymbolRange {
  uint64_t start = 0;
  uint64_t freq = 0;
};

// Anything the stream can code with: maps symbols to slot ranges and slots
// back to symbols. Implemented by SymbolTable and by the lazily evaluated
// Gaussian bin distributions.
template <typename D>
concept AnsDistribution = requires(const D& d, int64_t symbol, uint64_t slot,
                                   SymbolRange& range) {
  { d.precision() } -> std::convertible_to<int>;
  { d.Range(symbol) } -> std::same_as<SymbolRange>;
  { d.Lookup(slot, range) } -> std::same_as<int64_t>;
};

// Materialized integer probability table over the signed symbols
// [symbol_base, symbol_base + size). Frequencies sum to 2^precision exactly
// and every symbol has mass at least 1.
class SymbolTable {
 public:
  SymbolTable(int precision, int64_t symbol_base, std::vector<uint64_t> freq);

  int precision() const { return precision_; }
  int64_t symbol_base() const { return symbol_base_; }
  int64_t min_symbol() const { return symbol_base_; }
  int64_t max_symbol() const {
    return symbol_base_ + static_cast<int64_t>(freq_.size()) - 1;
  }
  size_t size() const { return freq_.size(); }
  std::span<const uint64_t> freq() const { return freq_; }
  // size() + 1 entries; cum()[0] == 0 and cum()[size()] == 2^precision.
  std::span<const uint64_t> cum() const { return cum_; }

  SymbolRange Range(int64_t symbol) const;
  int64_t Lookup(uint64_t slot, SymbolRange& range) const;

 private:
  int precision_;
  int64_t symbol_base_;
  std::vector<uint64_t> freq_;
  std::vector<uint64_t> cum_;
};

enum class ReservoirMode {
  kLenient,  // extend the reservoir deterministically on underflow
  kStrict,   // throw ReservoirExhausted on underflow
};

class AnsStream {
 public:
  static constexpr uint64_t kLowerBound = uint64_t{1} << 32;

  // Fresh sender-side stream: the state is a seed-derived constant and the
  // stack holds `aux_words` reservoir words.
  explicit AnsStream(uint64_t seed = 0, size_t aux_words = 0,
                     ReservoirMode mode = ReservoirMode::kLenient);

  // Receiver-side stream restored from Flush() bytes. Underflow is an error
  // because a well-formed archive never pops below what the sender pushed.
  static AnsStream FromBytes(std::span<const uint8_t> bytes);

  // State the sender starts from for a given seed.
  static uint64_t InitialState(uint64_t seed);
  // Reservoir word number `i` (0 is the first word popped).
  static std::vector<uint32_t> ReservoirWords(uint64_t seed, size_t count);

  void EncodeRange(SymbolRange range, int precision);
  // Decodes the slot range containing the current slot and updates the
  // state; `lookup(slot, range)` must return the symbol and fill its range.
  template <typename Lookup>
  int64_t DecodeWith(int precision, Lookup&& lookup);

  template <AnsDistribution D>
  void Encode(const D& dist, int64_t symbol) {
    EncodeRange(dist.Range(symbol), dist.precision());
  }

  template <AnsDistribution D>
  int64_t Decode(const D& dist) {
    return DecodeWith(dist.precision(),
                      [&](uint64_t slot, SymbolRange& range) {
                        return dist.Lookup(slot, range);
                      });
  }

  // Exactly uniform symbols in [0, 2^bits), bits <= 32.
  void EncodeUniform(uint64_t value, int bits);
  uint64_t DecodeUniform(int bits);

  double total_bits() const;
  double initial_bits() const { return initial_bits_; }
  double net_bits() const { return total_bits() - initial_bits_; }
  // Lowest net_bits() seen since construction or the last ResetPeak(). Its
  // negation is the number of auxiliary bits the session required.
  double min_net_bits() const { return min_net_bits_; }
  void ResetPeak() { min_net_bits_ = net_bits(); }

  uint64_t state() const { return state_; }
  std::span<const uint32_t> words() const { return words_; }
  uint64_t seed() const { return seed_; }
  // Reservoir words pulled in past the initial stack (lenient mode only).
  size_t extension_words() const { return drawn_ - initial_words_; }

  std::vector<uint8_t> Flush() const;

  // True when the stream is exactly a fresh reservoir for `seed` holding at
  // least `aux_words` words: the receiver's losslessness witness.
  bool MatchesReservoir(uint64_t seed, size_t aux_words) const;

  friend bool operator==(const AnsStream& a, const AnsStream& b) {
    return a.state_ == b.state_ && a.words_ == b.words_;
  }

 private:
  AnsStream(uint64_t state, std::vector<uint32_t> words, ReservoirMode mode);

  void Pop();
  void TrackPeak();

  uint64_t state_;
  std::vector<uint32_t> words_;
  ReservoirMode mode_;
  uint64_t seed_ = 0;
  Xoshiro256 reservoir_{0};
  size_t initial_words_ = 0;
  size_t drawn_ = 0;
  double initial_bits_ = 0.0;
  double min_net_bits_ = 0.0;
};

template <typename Lookup>
int64_t AnsStream::DecodeWith(int precision, Lookup&& lookup) {
  const uint64_t mask = (uint64_t{1} << precision) - 1;
  const uint64_t slot = state_ & mask;
  SymbolRange range;
  const int64_t symbol = lookup(slot, range);
  if (range.freq == (uint64_t{1} << precision)) return symbol;
  state_ = range.freq * (state_ >> precision) + slot - range.start;
  if (state_ < kLowerBound) Pop();
  TrackPeak();
  return symbol;
}

}  // namespace lbb

#endif  // LBB_ANS_H_
