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

#include "lbb/ans.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace lbb {

SymbolTable::SymbolTable(int precision, int64_t symbol_base,
                         std::vector<uint64_t> freq)
    : precision_(precision), symbol_base_(symbol_base), freq_(std::move(freq)) {
  if (precision_ < 0 || precision_ > kMaxPrecision) {
    Fail(ErrorCode::kInvalidArgument,
         "table precision must be in [0, 32], got " + std::to_string(precision_));
  }
  if (freq_.empty()) Fail(ErrorCode::kInvalidArgument, "empty symbol table");
  cum_.resize(freq_.size() + 1);
  cum_[0] = 0;
  for (size_t i = 0; i < freq_.size(); ++i) {
    if (freq_[i] == 0) {
      Fail(ErrorCode::kInvalidArgument,
           "zero frequency at table index " + std::to_string(i));
    }
    cum_[i + 1] = cum_[i] + freq_[i];
  }
  if (cum_.back() != (uint64_t{1} << precision_)) {
    Fail(ErrorCode::kInvalidArgument,
         "frequencies sum to " + std::to_string(cum_.back()) + ", expected 2^" +
             std::to_string(precision_));
  }
}

SymbolRange SymbolTable::Range(int64_t symbol) const {
  if (symbol < min_symbol() || symbol > max_symbol()) {
    Fail(ErrorCode::kSymbolOutOfTable,
         "symbol " + std::to_string(symbol) + " outside [" +
             std::to_string(min_symbol()) + ", " +
             std::to_string(max_symbol()) + "]");
  }
  const auto i = static_cast<size_t>(symbol - symbol_base_);
  return {cum_[i], freq_[i]};
}

int64_t SymbolTable::Lookup(uint64_t slot, SymbolRange& range) const {
  // First cum entry strictly greater than slot, minus one.
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), slot);
  const auto i = static_cast<size_t>(it - cum_.begin()) - 1;
  range = {cum_[i], freq_[i]};
  return symbol_base_ + static_cast<int64_t>(i);
}

namespace {

constexpr uint64_t kStateSalt = 0x243F6A8885A308D3ull;

uint32_t ReservoirWord(Xoshiro256& rng) {
  return static_cast<uint32_t>(rng() >> 32);
}

}  // namespace

uint64_t AnsStream::InitialState(uint64_t seed) {
  uint64_t s = seed ^ kStateSalt;
  return (uint64_t{1} << 63) | (SplitMix64(s) >> 1);
}

std::vector<uint32_t> AnsStream::ReservoirWords(uint64_t seed, size_t count) {
  Xoshiro256 rng(seed);
  std::vector<uint32_t> out(count);
  for (auto& w : out) w = ReservoirWord(rng);
  return out;
}

AnsStream::AnsStream(uint64_t seed, size_t aux_words, ReservoirMode mode)
    : state_(InitialState(seed)),
      mode_(mode),
      seed_(seed),
      reservoir_(seed),
      initial_words_(aux_words),
      drawn_(aux_words) {
  // Word 0 is popped first, so it sits on top of the stack.
  words_.resize(aux_words);
  for (size_t i = 0; i < aux_words; ++i) {
    words_[aux_words - 1 - i] = ReservoirWord(reservoir_);
  }
  initial_bits_ = total_bits();
  min_net_bits_ = 0.0;
}

AnsStream::AnsStream(uint64_t state, std::vector<uint32_t> words,
                     ReservoirMode mode)
    : state_(state), words_(std::move(words)), mode_(mode) {
  initial_bits_ = total_bits();
  min_net_bits_ = 0.0;
}

AnsStream AnsStream::FromBytes(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8 || (bytes.size() - 8) % 4 != 0) {
    Fail(ErrorCode::kCorruptArchive,
         "stream of " + std::to_string(bytes.size()) + " bytes is not 8 + 4n");
  }
  uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state |= uint64_t{bytes[i]} << (8 * i);
  if (state < kLowerBound) {
    Fail(ErrorCode::kCorruptArchive, "stream state below normalization bound");
  }
  std::vector<uint32_t> words((bytes.size() - 8) / 4);
  for (size_t w = 0; w < words.size(); ++w) {
    const uint8_t* p = bytes.data() + 8 + 4 * w;
    words[w] = uint32_t{p[0]} | (uint32_t{p[1]} << 8) | (uint32_t{p[2]} << 16) |
               (uint32_t{p[3]} << 24);
  }
  return AnsStream(state, std::move(words), ReservoirMode::kStrict);
}

void AnsStream::EncodeRange(SymbolRange range, int precision) {
  const uint64_t total = uint64_t{1} << precision;
  if (range.freq == total) return;
  if (range.freq == 0 || range.start + range.freq > total) {
    Fail(ErrorCode::kSymbolOutOfTable, "invalid slot range");
  }
  const uint64_t x_max = ((kLowerBound >> precision) << 32) * range.freq;
  if (state_ >= x_max) {
    words_.push_back(static_cast<uint32_t>(state_));
    state_ >>= 32;
  }
  state_ = ((state_ / range.freq) << precision) + (state_ % range.freq) +
           range.start;
}

void AnsStream::EncodeUniform(uint64_t value, int bits) {
  if (bits < 0 || bits > kMaxPrecision || (bits < 64 && (value >> bits) != 0)) {
    Fail(ErrorCode::kSymbolOutOfTable, "uniform value out of range");
  }
  if (bits == 0) return;
  EncodeRange({value, 1}, bits);
}

uint64_t AnsStream::DecodeUniform(int bits) {
  if (bits < 0 || bits > kMaxPrecision) {
    Fail(ErrorCode::kInvalidArgument, "uniform width must be in [0, 32]");
  }
  if (bits == 0) return 0;
  return static_cast<uint64_t>(
      DecodeWith(bits, [](uint64_t slot, SymbolRange& range) {
        range = {slot, 1};
        return static_cast<int64_t>(slot);
      }));
}

void AnsStream::Pop() {
  uint32_t word;
  if (!words_.empty()) {
    word = words_.back();
    words_.pop_back();
  } else {
    if (mode_ == ReservoirMode::kStrict) {
      Fail(ErrorCode::kReservoirExhausted,
           "decode underflowed an empty stream in strict mode");
    }
    word = ReservoirWord(reservoir_);
    ++drawn_;
    initial_bits_ += 32.0;
  }
  state_ = (state_ << 32) | word;
}

void AnsStream::TrackPeak() {
  const double net = net_bits();
  if (net < min_net_bits_) min_net_bits_ = net;
}

double AnsStream::total_bits() const {
  return std::log2(static_cast<double>(state_)) + 32.0 * words_.size();
}

std::vector<uint8_t> AnsStream::Flush() const {
  std::vector<uint8_t> out(8 + 4 * words_.size());
  for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>(state_ >> (8 * i));
  for (size_t w = 0; w < words_.size(); ++w) {
    for (int i = 0; i < 4; ++i) {
      out[8 + 4 * w + i] = static_cast<uint8_t>(words_[w] >> (8 * i));
    }
  }
  return out;
}

bool AnsStream::MatchesReservoir(uint64_t seed, size_t aux_words) const {
  if (state_ != InitialState(seed) || words_.size() < aux_words) return false;
  const auto expected = ReservoirWords(seed, words_.size());
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[words_.size() - 1 - i] != expected[i]) return false;
  }
  return true;
}

}  // namespace lbb
