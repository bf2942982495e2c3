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

#include "mnemo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mnemo/error.hpp"

namespace mnemo {
namespace {

std::vector<std::string_view> distinct(std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyCandidates, "no candidate cards to schedule");
  std::vector<std::string_view> out;
  std::unordered_set<std::string_view> present;
  for (const std::string& id : candidates) {
    if (present.insert(id).second) out.push_back(id);
  }
  return out;
}

// Orders by ascending key, ties by card_id, and keeps the first n.
std::vector<ScheduledCard> take_sorted(std::vector<ScheduledCard> cards, const std::vector<double>& keys,
                                       std::size_t n) {
  std::vector<std::size_t> order(cards.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return cards[a].card_id < cards[b].card_id;
  });
  std::vector<ScheduledCard> out;
  for (std::size_t i = 0; i < order.size() && out.size() < n; ++i) out.push_back(std::move(cards[order[i]]));
  return out;
}

}  // namespace

std::string_view to_string(PolicyKind kind) { return kind == PolicyKind::kDelta ? "delta" : "threshold"; }

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "delta") return PolicyKind::kDelta;
  if (text == "threshold") return PolicyKind::kThreshold;
  throw Error(ErrorCode::kInvalidArgument, "unknown policy '" + std::string(text) + "'");
}

void validate(const PolicyConfig& config) {
  if (!(config.retention_threshold > 0.0 && config.retention_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "retention threshold must be in (0, 1)");
  }
  if (config.delta_interval <= 0) throw Error(ErrorCode::kInvalidArgument, "delta interval must be positive");
}

double delta_combine(double p_now, double p_correct, double p_incorrect, double p_no_study) {
  // Same value as p_c*p + p_i*(1-p) - p_n, but exactly zero when p_c == p_i == p_n.
  return (p_incorrect - p_no_study) + p_now * (p_correct - p_incorrect);
}

DeltaScore delta_score(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                       std::string_view card_id, Timestamp now, Timestamp delta_interval) {
  if (delta_interval <= 0) throw Error(ErrorCode::kInvalidArgument, "delta interval must be positive");
  const Timestamp later = now + delta_interval;
  DeltaScore out;
  out.card_id = std::string(card_id);
  out.p_now = model.predict(user, cards, card_id, now);
  out.p_no_study = model.predict(user, cards, card_id, later);
  for (bool correct : {true, false}) {
    UserState branch = user;
    branch.apply(StudyRecord{user.user_id(), std::string(card_id), now, correct, 0, {}});
    const double p = model.predict(branch, cards.with_study(card_id, correct), card_id, later);
    (correct ? out.p_correct : out.p_incorrect) = p;
  }
  out.score = delta_combine(out.p_now, out.p_correct, out.p_incorrect, out.p_no_study);
  return out;
}

std::vector<ScheduledCard> schedule_delta(const StudentModel& model, const UserState& user,
                                          const CardAggregatesView& cards, std::span<const std::string> candidates,
                                          Timestamp now, const PolicyConfig& config) {
  validate(config);
  std::vector<ScheduledCard> scored;
  std::vector<double> keys;
  for (std::string_view id : distinct(candidates)) {
    DeltaScore d = delta_score(model, user, cards, id, now, config.delta_interval);
    keys.push_back(-d.score);
    scored.push_back({std::string(id), d.p_now, std::move(d)});
  }
  return take_sorted(std::move(scored), keys, config.n_cards);
}

std::vector<ScheduledCard> schedule_threshold(const StudentModel& model, const UserState& user,
                                              const CardAggregatesView& cards,
                                              std::span<const std::string> candidates, Timestamp now,
                                              const PolicyConfig& config) {
  validate(config);
  std::vector<ScheduledCard> scored;
  std::vector<double> keys;
  for (std::string_view id : distinct(candidates)) {
    const double p = model.predict(user, cards, id, now);
    keys.push_back(std::abs(p - config.retention_threshold));
    scored.push_back({std::string(id), p, std::nullopt});
  }
  return take_sorted(std::move(scored), keys, config.n_cards);
}

std::vector<ScheduledCard> schedule(const StudentModel& model, const UserState& user, const CardAggregatesView& cards,
                                    std::span<const std::string> candidates, Timestamp now,
                                    const PolicyConfig& config) {
  return config.kind == PolicyKind::kDelta ? schedule_delta(model, user, cards, candidates, now, config)
                                           : schedule_threshold(model, user, cards, candidates, now, config);
}

}  // namespace mnemo
