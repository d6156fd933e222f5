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


#ifndef LBB_TESTS_TEST_UTIL_H_
#define LBB_TESTS_TEST_UTIL_H_

#include <gtest/gtest.h>

#include "lbb/error.h"

// Expects `stmt` to throw lbb::Error carrying `code`.
#define EXPECT_LBB_ERROR(stmt, expected_code)                             \
  do {                                                                    \
    try {                                                                 \
      stmt;                                                               \
      ADD_FAILURE() << #stmt " did not throw";                            \
    } catch (const ::lbb::Error& e) {                                     \
      EXPECT_EQ(e.code(), expected_code) << e.what();                     \
    }                                                                     \
  } while (0)

#endif  // LBB_TESTS_TEST_UTIL_H_
