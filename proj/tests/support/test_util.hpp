// Copyright 2026 The Mnemo Authors.
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

#pragma once

#include <gtest/gtest.h>

#include <optional>

#include "mnemo/error.hpp"

namespace mnemo::testing {

// The code of the mnemo::Error thrown by `fn`, or nullopt when it returns.
template <typename Fn>
std::optional<ErrorCode> error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace mnemo::testing

#define EXPECT_MNEMO_ERROR(stmt, code_value) \
  EXPECT_EQ(::mnemo::testing::error_code([&] { stmt; }), std::optional<::mnemo::ErrorCode>(code_value))
