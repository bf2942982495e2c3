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

#include <string>
#include <string_view>

#include "mnemo/domain.hpp"
#include "mnemo/features.hpp"

namespace mnemo {

/// A student model maps one user's study state to the probability of a
/// correct answer on a card at an instant. Implementations must be pure and
/// safe to call concurrently.
class StudentModel {
 public:
  virtual ~StudentModel() = default;

  virtual std::string tag() const = 0;
  virtual double predict(const UserState& user, const CardAggregatesView& cards, std::string_view card_id,
                         Timestamp now) const = 0;
};

}  // namespace mnemo
