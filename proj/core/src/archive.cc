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

#include "lbb/archive.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "lbb/error.h"
#include "lbb/random.h"

namespace lbb {

namespace {

constexpr char kMagic[4] = {'L', 'B', 'B', 'A'};

struct Record {
  uint32_t elided = 0;
  uint64_t state = 0;
  std::vector<uint32_t> words;
};

uint32_t CountElided(const AnsStream& s, const std::vector<uint32_t>& reservoir) {
  const auto words = s.words();
  const size_t aux = reservoir.size();
  const size_t limit = std::min(words.size(), aux);
  uint32_t e = 0;
  while (e < limit && words[e] == reservoir[aux - 1 - e]) ++e;
  return e;
}

void WriteRecord(ByteWriter& w, const AnsStream& s,
                 const std::vector<uint32_t>& reservoir) {
  const uint32_t elided = CountElided(s, reservoir);
  const auto words = s.words();
  w.U32(elided);
  w.U32(static_cast<uint32_t>(words.size() - elided));
  w.U64(s.state());
  for (size_t i = elided; i < words.size(); ++i) w.U32(words[i]);
}

Record ReadRecord(ByteReader& r, size_t aux_words) {
  Record rec;
  rec.elided = r.U32();
  const uint32_t n = r.U32();
  if (rec.elided > aux_words) {
    Fail(ErrorCode::kCorruptArchive, "record elides more words than the reservoir holds");
  }
  if (uint64_t{n} * 4 > r.remaining()) {
    Fail(ErrorCode::kCorruptArchive, "truncated record");
  }
  rec.state = r.U64();
  rec.words.resize(n);
  for (uint32_t& w : rec.words) w = r.U32();
  return rec;
}

AnsStream RestoreStream(const Record& rec, uint64_t seed, size_t aux_words) {
  const auto reservoir = AnsStream::ReservoirWords(seed, aux_words);
  ByteWriter w;
  w.U64(rec.state);
  for (uint32_t i = 0; i < rec.elided; ++i) w.U32(reservoir[aux_words - 1 - i]);
  for (uint32_t v : rec.words) w.U32(v);
  return AnsStream::FromBytes(w.bytes());
}

Dequantizer MakeDequantizer(const FlowModel* flow) {
  return flow ? Dequantizer::ConditionalFlow(*flow) : Dequantizer::Uniform();
}

void CheckData(const Tensor& data, size_t dim, int bit_depth) {
  if (data.dtype != DType::kU8 || data.shape.size() != 2) {
    Fail(ErrorCode::kInvalidArgument, "input must be a u8 tensor of shape (n, d)");
  }
  if (data.shape[1] != dim) {
    Fail(ErrorCode::kDimensionMismatch,
         "input has d=" + std::to_string(data.shape[1]) + ", model has d=" +
             std::to_string(dim));
  }
  if (bit_depth < 1 || bit_depth > 8) {
    Fail(ErrorCode::kInvalidArgument, "bit depth must be in [1, 8] for u8 data");
  }
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

bool operator==(const ArchiveHeader& a, const ArchiveHeader& b) {
  const auto& p = a.params;
  const auto& q = b.params;
  return a.model_hash == b.model_hash && a.bit_depth == b.bit_depth &&
         a.dim == b.dim && a.item_count == b.item_count && p.k_x == q.k_x &&
         p.k_z == q.k_z && p.sigma == q.sigma && p.r == q.r && p.T == q.T &&
         p.seed == q.seed && p.aux_words == q.aux_words &&
         a.dequant_kind == b.dequant_kind && a.dequant_hash == b.dequant_hash &&
         a.payload_length == b.payload_length;
}

void WriteHeader(ByteWriter& w, const ArchiveHeader& h) {
  for (char c : kMagic) w.U8(static_cast<uint8_t>(c));
  w.U32(kArchiveVersion);
  w.U64(h.model_hash);
  w.U8(h.bit_depth);
  w.U32(h.dim);
  w.U64(h.item_count);
  w.U32(static_cast<uint32_t>(h.params.k_x));
  w.U32(static_cast<uint32_t>(h.params.k_z));
  w.F64(h.params.sigma);
  w.U32(static_cast<uint32_t>(h.params.r));
  w.F64(h.params.T);
  w.U64(h.params.seed);
  w.U64(h.params.aux_words);
  w.U8(static_cast<uint8_t>(h.dequant_kind));
  w.U64(h.dequant_hash);
  w.U64(h.payload_length);
}

ArchiveHeader ReadHeader(ByteReader& r) {
  bool magic_ok = r.remaining() >= 4;
  for (char c : kMagic) magic_ok = magic_ok && r.U8() == static_cast<uint8_t>(c);
  if (!magic_ok) Fail(ErrorCode::kBadMagic, "not an LBBA archive");
  const uint32_t version = r.U32();
  if (version != kArchiveVersion) {
    Fail(ErrorCode::kVersionMismatch,
         "archive version " + std::to_string(version) + ", expected 1");
  }
  ArchiveHeader h;
  h.model_hash = r.U64();
  h.bit_depth = r.U8();
  h.dim = r.U32();
  h.item_count = r.U64();
  h.params.k_x = static_cast<int>(r.U32());
  h.params.k_z = static_cast<int>(r.U32());
  h.params.sigma = r.F64();
  h.params.r = static_cast<int>(r.U32());
  h.params.T = r.F64();
  h.params.seed = r.U64();
  h.params.aux_words = r.U64();
  const uint8_t kind = r.U8();
  if (kind > 1) Fail(ErrorCode::kCorruptArchive, "unknown dequantizer kind");
  h.dequant_kind = static_cast<DequantKind>(kind);
  h.dequant_hash = r.U64();
  h.payload_length = r.U64();
  try {
    h.params.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptArchive, std::string("bad parameters: ") + e.what());
  }
  if (h.params.aux_words > (size_t{1} << 24)) {
    Fail(ErrorCode::kCorruptArchive, "implausible reservoir size");
  }
  return h;
}

ArchiveHeader PeekHeader(std::span<const uint8_t> archive) {
  ByteReader r(archive, ErrorCode::kCorruptArchive);
  return ReadHeader(r);
}

double CompressReport::MeanNetBitsPerDim() const {
  if (items.empty() || dim == 0) return 0.0;
  double s = 0.0;
  for (const auto& it : items) s += it.net_bits;
  return s / double(items.size()) / double(dim);
}

double CompressReport::MeanPeakAuxBitsPerDim() const {
  if (items.empty() || dim == 0) return 0.0;
  double s = 0.0;
  for (const auto& it : items) s += it.peak_aux_bits;
  return s / double(items.size()) / double(dim);
}

void ParallelFor(size_t n, size_t threads,
                 const std::function<void(size_t)>& fn) {
  const size_t workers = std::max<size_t>(1, std::min(threads, n));
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (size_t i; !stop && (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

std::vector<uint8_t> CompressArchive(const FlowModel& model,
                                     const FlowModel* dequantizer,
                                     const Tensor& data, int bit_depth,
                                     const CodecParams& params, size_t threads,
                                     CompressReport* report) {
  const auto start = std::chrono::steady_clock::now();
  params.Validate();
  const size_t d = model.dim();
  CheckData(data, d, bit_depth);
  const size_t n = data.shape[0];
  const Dequantizer dq = MakeDequantizer(dequantizer);

  std::vector<std::vector<uint8_t>> records(n);
  std::vector<ItemReport> items(n);
  ParallelFor(n, threads, [&](size_t i) {
    const uint64_t seed = DeriveSeed(params.seed, i);
    AnsStream stream(seed, params.aux_words);
    Indices x(data.u8.begin() + i * d, data.u8.begin() + (i + 1) * d);
    DequantEncode(x, bit_depth, model, dq, params, stream);
    items[i] = {stream.net_bits(), -stream.min_net_bits(),
                stream.extension_words()};
    ByteWriter w;
    WriteRecord(w, stream, AnsStream::ReservoirWords(seed, params.aux_words));
    records[i] = std::move(w.bytes());
  });

  ArchiveHeader h;
  h.model_hash = ModelHash(model);
  h.bit_depth = static_cast<uint8_t>(bit_depth);
  h.dim = static_cast<uint32_t>(d);
  h.item_count = n;
  h.params = params;
  h.dequant_kind = dq.kind;
  h.dequant_hash = dequantizer ? ModelHash(*dequantizer) : 0;
  for (const auto& rec : records) h.payload_length += rec.size();
  ByteWriter w;
  WriteHeader(w, h);
  for (const auto& rec : records) w.Raw(rec);
  if (report) {
    report->items = std::move(items);
    report->dim = d;
    report->archive_bytes = w.bytes().size();
    report->seconds = Seconds(start);
  }
  return std::move(w.bytes());
}

Tensor DecompressArchive(const FlowModel& model, const FlowModel* dequantizer,
                         std::span<const uint8_t> archive, size_t threads,
                         DecompressReport* report) {
  const auto start = std::chrono::steady_clock::now();
  ByteReader r(archive, ErrorCode::kCorruptArchive);
  const ArchiveHeader h = ReadHeader(r);
  if (h.model_hash != ModelHash(model)) {
    Fail(ErrorCode::kHashMismatch, "archive was written with a different model");
  }
  if (h.dequant_kind == DequantKind::kConditionalFlow) {
    if (!dequantizer || h.dequant_hash != ModelHash(*dequantizer)) {
      Fail(ErrorCode::kHashMismatch,
           "archive was written with a different dequantizer");
    }
  } else if (dequantizer) {
    Fail(ErrorCode::kHashMismatch,
         "archive uses the uniform dequantizer but one was supplied");
  }
  if (h.dim != model.dim()) {
    Fail(ErrorCode::kCorruptArchive, "dimension does not match the model");
  }
  if (h.bit_depth < 1 || h.bit_depth > 8) {
    Fail(ErrorCode::kCorruptArchive, "bit depth must be in [1, 8]");
  }
  if (h.payload_length != r.remaining()) {
    Fail(ErrorCode::kCorruptArchive, "payload length mismatch");
  }
  if (h.item_count > r.remaining() / 16) {
    Fail(ErrorCode::kCorruptArchive, "item count exceeds payload");
  }
  std::vector<Record> records;
  records.reserve(h.item_count);
  for (uint64_t i = 0; i < h.item_count; ++i) {
    records.push_back(ReadRecord(r, h.params.aux_words));
  }
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptArchive, "trailing bytes");

  const Dequantizer dq = MakeDequantizer(dequantizer);
  const size_t d = h.dim;
  Tensor out;
  out.dtype = DType::kU8;
  out.shape = {h.item_count, d};
  out.u8.resize(h.item_count * d);
  ParallelFor(h.item_count, threads, [&](size_t i) {
    const uint64_t seed = DeriveSeed(h.params.seed, i);
    Indices x;
    bool restored = false;
    try {
      AnsStream stream = RestoreStream(records[i], seed, h.params.aux_words);
      x = DequantDecode(d, h.bit_depth, model, dq, h.params, stream);
      restored = stream.MatchesReservoir(seed, h.params.aux_words);
    } catch (const Error& e) {
      Fail(ErrorCode::kCorruptArchive,
           "item " + std::to_string(i) + ": " + e.what());
    }
    if (!restored) {
      Fail(ErrorCode::kCorruptArchive,
           "item " + std::to_string(i) + " did not restore its reservoir");
    }
    for (size_t j = 0; j < d; ++j) out.u8[i * d + j] = static_cast<uint8_t>(x[j]);
  });
  if (report) {
    report->items = h.item_count;
    report->reservoir_verified = true;
    report->seconds = Seconds(start);
  }
  return out;
}

}  // namespace lbb
