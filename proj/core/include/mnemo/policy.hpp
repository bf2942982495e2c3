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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnemo/features.hpp"
#include "mnemo/student_model.hpp"

namespace mnemo {

enum class PolicyKind : std::uint8_t { kThreshold, kDelta };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view text);  // "threshold", "delta"

struct PolicyConfig {
  Timestamp delta_interval = kSecondsPerDay;
  std::size_t n_cards = 10;
  double retention_threshold = 0.9;
  PolicyKind kind = PolicyKind::kDelta;
};

// Throws kInvalidArgument unless 0 < threshold < 1 and delta_interval > 0.
void validate(const PolicyConfig& config);

struct DeltaScore {
  std::string card_id;
  double score = 0.0;
  double p_now = 0.0;
  double p_correct = 0.0;     // at now + delta after a correct study at now
  double p_incorrect = 0.0;   // at now + delta after an incorrect study at now
  double p_no_study = 0.0;    // at now + delta with no study
};

// Expected gain in recall at now + delta from studying now.
double delta_combine(double p_now, double p_correct, double p_incorrect, double p_no_study);

// Branches are evaluated on copies; `user` and `cards` are never touched.
DeltaScore delta_score(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                       std::string_view card_id, Timestamp now, Timestamp delta_interval = kSecondsPerDay);

struct ScheduledCard {
  std::string card_id;
  double p_now = 0.0;
  std::optional<DeltaScore> delta;  // set by the delta policy
};

// Top n_cards by delta score, descending, ties by card_id. Throws
// kEmptyCandidates.
std::vector<ScheduledCard> schedule_delta(const StudentModel& model, const UserState& user,
                                          const CardAggregatesView& cards, std::span<const std::string> candidates,
                                          Timestamp now, const PolicyConfig& config);
// Top n_cards by |p_now - retention_threshold|, ascending, ties by card_id.
// Throws kEmptyCandidates.
std::vector<ScheduledCard> schedule_threshold(const StudentModel& model, const UserState& user,
                                              const CardAggregatesView& cards,
                                              std::span<const std::string> candidates, Timestamp now,
                                              const PolicyConfig& config);
// Dispatches on config.kind.
std::vector<ScheduledCard> schedule(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                                    std::span<const std::string> candidates, Timestamp now,
                                    const PolicyConfig& config);

}  // namespace mnemo
