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

#include "lbb/io.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lbb {

namespace {

constexpr char kWeightsMagic[4] = {'L', 'B', 'B', 'W'};
constexpr char kTensorMagic[4] = {'L', 'B', 'B', 'T'};
// Sanity bound on any single dimension read from disk.
constexpr uint64_t kMaxDim = uint64_t{1} << 28;

void WriteMagic(ByteWriter& w, const char (&magic)[4]) {
  for (char c : magic) w.U8(static_cast<uint8_t>(c));
}

bool ReadMagic(ByteReader& r, const char (&magic)[4]) {
  bool ok = true;
  for (char c : magic) ok &= r.U8() == static_cast<uint8_t>(c);
  return ok;
}

uint32_t ReadDim(ByteReader& r) {
  const uint32_t v = r.U32();
  if (v == 0 || v > kMaxDim) Fail(ErrorCode::kCorruptTensor, "bad dimension");
  return v;
}

double ReadFinite(ByteReader& r) {
  const double v = r.F64();
  if (!std::isfinite(v)) Fail(ErrorCode::kCorruptTensor, "non-finite weight");
  return v;
}

void WriteMlp(ByteWriter& w, const Mlp& mlp) {
  w.U32(static_cast<uint32_t>(mlp.layers.size()));
  for (const auto& dense : mlp.layers) {
    w.U32(static_cast<uint32_t>(dense.weight.rows()));
    w.U32(static_cast<uint32_t>(dense.weight.cols()));
    for (double v : dense.weight.data()) w.F64(v);
    for (double v : dense.bias) w.F64(v);
  }
}

Mlp ReadMlp(ByteReader& r, size_t expected_in, size_t expected_out) {
  Mlp mlp;
  const uint32_t n = r.U32();
  if (n == 0 || n > 64) Fail(ErrorCode::kCorruptTensor, "bad MLP depth");
  size_t prev_out = expected_in;
  for (uint32_t l = 0; l < n; ++l) {
    const uint32_t out = ReadDim(r);
    const uint32_t in = ReadDim(r);
    if (in != prev_out) Fail(ErrorCode::kCorruptTensor, "MLP shape mismatch");
    if (static_cast<uint64_t>(out) * in > r.remaining() / 8) {
      Fail(ErrorCode::kCorruptTensor, "truncated MLP weights");
    }
    Mlp::Dense dense{Matrix(out, in), Vec(out)};
    for (double& v : dense.weight.data()) v = ReadFinite(r);
    for (double& v : dense.bias) v = ReadFinite(r);
    mlp.layers.push_back(std::move(dense));
    prev_out = out;
  }
  if (prev_out != expected_out) {
    Fail(ErrorCode::kCorruptTensor, "MLP output size mismatch");
  }
  return mlp;
}

}  // namespace

void ByteWriter::U32(uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::U64(uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::F64(double v) { U64(std::bit_cast<uint64_t>(v)); }

void ByteReader::Need(size_t n) {
  if (remaining() < n) Fail(error_, "unexpected end of data");
}

uint8_t ByteReader::U8() {
  Need(1);
  return bytes_[pos_++];
}

uint32_t ByteReader::U32() {
  Need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t{bytes_[pos_++]} << (8 * i);
  return v;
}

uint64_t ByteReader::U64() {
  Need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t{bytes_[pos_++]} << (8 * i);
  return v;
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::span<const uint8_t> ByteReader::Raw(size_t n) {
  Need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::vector<uint8_t> SerializeModel(const FlowModel& model) {
  ByteWriter w;
  WriteMagic(w, kWeightsMagic);
  w.U32(kWeightsVersion);
  w.U32(static_cast<uint32_t>(model.layers().size()));
  w.U32(static_cast<uint32_t>(model.dim()));
  w.U32(static_cast<uint32_t>(model.context_dim()));
  for (const auto& layer : model.layers()) {
    w.U8(static_cast<uint8_t>(TagOf(layer)));
    w.U32(static_cast<uint32_t>(LayerDim(layer)));
    if (const auto* a = std::get_if<ActNorm>(&layer)) {
      for (double v : a->scale) w.F64(v);
      for (double v : a->bias) w.F64(v);
    } else if (const auto* d = std::get_if<DenseLinear>(&layer)) {
      w.U32(static_cast<uint32_t>(d->block()));
      for (double v : d->weight().data()) w.F64(v);
    } else if (const auto* c = std::get_if<AffineCoupling>(&layer)) {
      w.U8(c->flip ? 1 : 0);
      w.U32(static_cast<uint32_t>(c->context_dim));
      WriteMlp(w, c->conditioner);
    } else if (const auto* ar = std::get_if<Autoregressive>(&layer)) {
      w.U32(static_cast<uint32_t>(ar->context_dim));
      WriteMlp(w, ar->conditioner);
    }
  }
  return std::move(w.bytes());
}

FlowModel DeserializeModel(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kCorruptTensor);
  if (bytes.size() < 4 || !ReadMagic(r, kWeightsMagic)) {
    Fail(ErrorCode::kBadMagic, "not an LBBW weights file");
  }
  const uint32_t version = r.U32();
  if (version != kWeightsVersion) {
    Fail(ErrorCode::kVersionMismatch,
         "weights version " + std::to_string(version) + ", expected 1");
  }
  const uint32_t count = r.U32();
  const uint32_t dim = ReadDim(r);
  const uint32_t context_dim = r.U32();
  if (count > 4096 || context_dim > kMaxDim) {
    Fail(ErrorCode::kCorruptTensor, "implausible header");
  }
  std::vector<FlowLayer> layers;
  for (uint32_t l = 0; l < count; ++l) {
    const uint8_t tag = r.U8();
    const uint32_t d = ReadDim(r);
    if (d != dim) Fail(ErrorCode::kCorruptTensor, "layer dimension mismatch");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::kActNorm: {
        ActNorm a{Vec(d), Vec(d)};
        for (double& v : a.scale) {
          v = ReadFinite(r);
          if (v == 0.0) Fail(ErrorCode::kNonInvertible, "zero ActNorm scale");
        }
        for (double& v : a.bias) v = ReadFinite(r);
        layers.emplace_back(std::move(a));
        break;
      }
      case LayerTag::kDenseLinear: {
        const uint32_t b = ReadDim(r);
        if (d % b != 0) Fail(ErrorCode::kCorruptTensor, "bad dense block");
        Matrix w(b, b);
        for (double& v : w.data()) v = ReadFinite(r);
        layers.emplace_back(DenseLinear(d, std::move(w)));
        break;
      }
      case LayerTag::kAffineCoupling: {
        AffineCoupling c;
        c.dim = d;
        c.flip = r.U8() != 0;
        c.context_dim = r.U32();
        if (c.context_dim != 0 && c.context_dim != context_dim) {
          Fail(ErrorCode::kCorruptTensor, "coupling context mismatch");
        }
        const size_t n_pass = c.PassIndices().size();
        const size_t n_tr = c.TransformedIndices().size();
        c.conditioner = ReadMlp(r, n_pass + c.context_dim, 2 * n_tr);
        layers.emplace_back(std::move(c));
        break;
      }
      case LayerTag::kAutoregressive: {
        Autoregressive a;
        a.dim = d;
        a.context_dim = r.U32();
        if (a.context_dim != 0 && a.context_dim != context_dim) {
          Fail(ErrorCode::kCorruptTensor, "autoregressive context mismatch");
        }
        a.conditioner = ReadMlp(r, d + a.context_dim, 2 * d);
        ApplyAutoregressiveMasks(a.conditioner, d);
        layers.emplace_back(std::move(a));
        break;
      }
      case LayerTag::kSigmoidSquash:
        layers.emplace_back(SigmoidSquash{d});
        break;
      default:
        Fail(ErrorCode::kCorruptTensor, "unknown layer tag " + std::to_string(tag));
    }
  }
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptTensor, "trailing bytes");
  return FlowModel(dim, std::move(layers), context_dim);
}

uint64_t Fnv1a64(std::span<const uint8_t> bytes, uint64_t basis) {
  uint64_t h = basis;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001B3ull;
  }
  return h;
}

uint64_t ModelHash(const FlowModel& model) {
  return Fnv1a64(SerializeModel(model));
}

std::vector<uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFile(const std::filesystem::path& path,
               std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIo, "short write to " + path.string());
}

void SaveWeights(const FlowModel& model, const std::filesystem::path& path) {
  WriteFile(path, SerializeModel(model));
}

FlowModel LoadWeights(const std::filesystem::path& path) {
  return DeserializeModel(ReadFile(path));
}

uint64_t Tensor::element_count() const {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  return n;
}

std::vector<uint8_t> SerializeTensor(const Tensor& tensor) {
  ByteWriter w;
  WriteMagic(w, kTensorMagic);
  w.U8(static_cast<uint8_t>(tensor.dtype));
  w.U32(static_cast<uint32_t>(tensor.shape.size()));
  for (uint64_t d : tensor.shape) w.U64(d);
  if (tensor.dtype == DType::kU8) {
    w.Raw(tensor.u8);
  } else {
    for (double v : tensor.f64) w.F64(v);
  }
  return std::move(w.bytes());
}

Tensor DeserializeTensor(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kCorruptTensor);
  if (bytes.size() < 4 || !ReadMagic(r, kTensorMagic)) {
    Fail(ErrorCode::kBadMagic, "not an LBBT tensor file");
  }
  Tensor t;
  const uint8_t dtype = r.U8();
  if (dtype > 1) Fail(ErrorCode::kCorruptTensor, "unknown dtype");
  t.dtype = static_cast<DType>(dtype);
  const uint32_t rank = r.U32();
  if (rank > 8) Fail(ErrorCode::kCorruptTensor, "rank too large");
  uint64_t count = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint64_t d = r.U64();
    if (d > kMaxDim) Fail(ErrorCode::kCorruptTensor, "dimension too large");
    t.shape.push_back(d);
    count *= d;
    if (count > kMaxDim * 16) Fail(ErrorCode::kCorruptTensor, "tensor too large");
  }
  const uint64_t width = t.dtype == DType::kU8 ? 1 : 8;
  if (r.remaining() != count * width) {
    Fail(ErrorCode::kCorruptTensor, "payload size does not match shape");
  }
  if (t.dtype == DType::kU8) {
    const auto raw = r.Raw(count);
    t.u8.assign(raw.begin(), raw.end());
  } else {
    t.f64.resize(count);
    for (double& v : t.f64) v = r.F64();
  }
  return t;
}

void SaveTensor(const Tensor& tensor, const std::filesystem::path& path) {
  WriteFile(path, SerializeTensor(tensor));
}

Tensor LoadTensor(const std::filesystem::path& path) {
  return DeserializeTensor(ReadFile(path));
}

}  // namespace lbb
