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

#include "lbb/error.h"

namespace lbb {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSymbolOutOfTable: return "SymbolOutOfTable";
    case ErrorCode::kReservoirExhausted: return "ReservoirExhausted";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kDegenerateStddev: return "DegenerateStddev";
    case ErrorCode::kWindowTooLarge: return "WindowTooLarge";
    case ErrorCode::kOutOfSupport: return "OutOfSupport";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonInvertible: return "NonInvertible";
    case ErrorCode::kUnsupportedLayer: return "UnsupportedLayer";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptTensor: return "CorruptTensor";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kHashMismatch: return "HashMismatch";
    case ErrorCode::kCorruptArchive: return "CorruptArchive";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace lbb
