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

#ifndef LBB_ERROR_H_
#define LBB_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace lbb {

enum class ErrorCode {
  kInvalidArgument,
  kSymbolOutOfTable,
  kReservoirExhausted,
  kOverflow,
  kDegenerateStddev,
  kWindowTooLarge,
  kOutOfSupport,
  kDimensionMismatch,
  kNonInvertible,
  kUnsupportedLayer,
  kNotPositiveDefinite,
  kBadMagic,
  kVersionMismatch,
  kCorruptTensor,
  kOutOfRange,
  kHashMismatch,
  kCorruptArchive,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type. The code is
// stable and machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lbb

#endif  // LBB_ERROR_H_
