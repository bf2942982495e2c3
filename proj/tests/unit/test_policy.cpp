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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mnemo/policy.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mnemo {
namespace {

constexpr Timestamp kNow = 1000000;

UserState base_user() {
  UserState u("u");
  u.apply({"u", "seed", kNow - 5000, true, 0, ""});
  return u;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(100 + i));
  return out;
}

TEST(Policy, WorkedExample) { EXPECT_NEAR(delta_combine(0.6, 0.9, 0.5, 0.4), 0.34, 1e-15); }

TEST(Policy, DeltaScoreIsDirectSubstitution) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  for (int i = 0; i < 200; ++i) {
    const oracle::TableModel::Row row{u(rng), u(rng), u(rng), u(rng)};
    model.set("c" + std::to_string(i), row);
    const DeltaScore d = delta_score(model, user, agg, "c" + std::to_string(i), kNow);
    const double want = row.p_correct * row.p_now + row.p_incorrect * (1 - row.p_now) - row.p_no_study;
    EXPECT_NEAR(d.score, want, 1e-12);
    EXPECT_EQ(d.p_now, row.p_now);
    EXPECT_EQ(d.p_correct, row.p_correct);
    EXPECT_EQ(d.p_incorrect, row.p_incorrect);
    EXPECT_EQ(d.p_no_study, row.p_no_study);
  }
}

TEST(Policy, InsensitiveModelScoresZero) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  for (double v : {0.0, 0.3, 0.77, 1.0}) {
    model.set("c", {0.42, v, v, v});
    EXPECT_EQ(delta_score(model, user, agg, "c", kNow).score, 0.0);
  }
}

TEST(Policy, AffineShiftRaisesScoreByConstant) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  model.set("c", {0.3, 0.5, 0.2, 0.25});
  const double before = delta_score(model, user, agg, "c", kNow).score;
  model.set("c", {0.3, 0.6, 0.3, 0.25});
  EXPECT_NEAR(delta_score(model, user, agg, "c", kNow).score - before, 0.1, 1e-15);
}

TEST(Policy, ScoringNeverMutatesInputs) {
  UserState user = base_user();
  CardAggregates agg;
  agg.add("c", true);
  oracle::TableModel model(user.record_count(), kNow);
  model.set("c", {0.5, 0.5, 0.5, 0.5});
  const auto before_count = user.record_count();
  delta_score(model, user, agg, "c", kNow);
  EXPECT_EQ(user.record_count(), before_count);
  EXPECT_EQ(user.card("c"), nullptr);
  EXPECT_EQ(agg.tally("c"), (CardTally{1, 0}));
  EXPECT_MNEMO_ERROR(delta_score(model, user, agg, "c", kNow, 0), ErrorCode::kInvalidArgument);
}

TEST(Policy, ScheduleDeltaTieBreakAndOrder) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  // scores A 0.3, B 0.1, C 0.3 with p_now = 1 so score = p_correct - p_no_study
  model.set("A", {1.0, 0.8, 0.0, 0.5});
  model.set("B", {1.0, 0.6, 0.0, 0.5});
  model.set("C", {1.0, 0.9, 0.0, 0.6});
  PolicyConfig cfg;
  cfg.n_cards = 2;
  const std::vector<std::string> cand{"C", "B", "A"};
  const auto got = schedule_delta(model, user, agg, cand, kNow, cfg);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].card_id, "A");
  EXPECT_EQ(got[1].card_id, "C");
  ASSERT_TRUE(got[0].delta);
  EXPECT_NEAR(got[0].delta->score, 0.3, 1e-15);
}

TEST(Policy, ScheduleDeltaMatchesSortOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  const UserState user = base_user();
  CardAggregates agg;
  for (int trial = 0; trial < 20; ++trial) {
    oracle::TableModel model(user.record_count(), kNow);
    const auto cand = ids(50);
    std::vector<std::pair<double, std::string>> want;
    for (const auto& id : cand) {
      oracle::TableModel::Row row{u(rng), u(rng), u(rng), u(rng)};
      if (trial % 2 == 0) row.p_now = std::round(row.p_now * 4) / 4;
      model.set(id, row);
      want.emplace_back(-(row.p_correct * row.p_now + row.p_incorrect * (1 - row.p_now) - row.p_no_study), id);
    }
    std::sort(want.begin(), want.end());
    PolicyConfig cfg;
    cfg.n_cards = 10;
    const auto got = schedule_delta(model, user, agg, cand, kNow, cfg);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(got[i].card_id, want[i].second);
  }
}

TEST(Policy, ZeroRecallMaxScoreAlwaysScheduled) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  const UserState user = base_user();
  CardAggregates agg;
  for (int trial = 0; trial < 50; ++trial) {
    oracle::TableModel model(user.record_count(), kNow);
    auto cand = ids(30);
    for (const auto& id : cand) model.set(id, {u(rng) + 0.5, u(rng), u(rng), u(rng)});
    model.set("zero", {0.0, 1.0, 1.0, 0.0});  // score 1, the maximum possible
    cand.push_back("zero");
    PolicyConfig cfg;
    cfg.n_cards = 1 + trial % 5;
    const auto got = schedule_delta(model, user, agg, cand, kNow, cfg);
    EXPECT_EQ(got.front().card_id, "zero");
    EXPECT_EQ(got.front().p_now, 0.0);
  }
}

TEST(Policy, ThresholdNearestFirst) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  model.set("a", {0.5, 0, 0, 0});
  model.set("b", {0.9, 0, 0, 0});
  model.set("c", {0.95, 0, 0, 0});
  PolicyConfig cfg;
  cfg.n_cards = 10;
  cfg.kind = PolicyKind::kThreshold;
  const std::vector<std::string> cand{"a", "c", "b"};
  const auto got = schedule(model, user, agg, cand, kNow, cfg);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].card_id, "b");
  EXPECT_EQ(got[1].card_id, "c");
  EXPECT_EQ(got[2].card_id, "a");
  EXPECT_FALSE(got[0].delta);
}

TEST(Policy, ThresholdAllZeroStillFills) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  const auto cand = ids(15);
  for (const auto& id : cand) model.set(id, {0.0, 0, 0, 0});
  PolicyConfig cfg;
  const auto got = schedule_threshold(model, user, agg, cand, kNow, cfg);
  ASSERT_EQ(got.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(got[i].card_id, cand[i]);
}

TEST(Policy, ThresholdMatchesDistanceSortOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  const auto cand = ids(40);
  std::vector<std::pair<double, std::string>> want;
  for (const auto& id : cand) {
    const double p = u(rng);
    model.set(id, {p, 0, 0, 0});
    want.emplace_back(std::abs(p - 0.8), id);
  }
  std::sort(want.begin(), want.end());
  PolicyConfig cfg;
  cfg.retention_threshold = 0.8;
  cfg.n_cards = 40;
  const auto got = schedule_threshold(model, user, agg, cand, kNow, cfg);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].card_id, want[i].second);
}

TEST(Policy, EdgeCases) {
  const UserState user = base_user();
  CardAggregates agg;
  oracle::TableModel model(user.record_count(), kNow);
  model.set("only", {0.2, 0.1, 0.1, 0.9});
  PolicyConfig cfg;
  const std::vector<std::string> one{"only", "only"};
  EXPECT_EQ(schedule_delta(model, user, agg, one, kNow, cfg).size(), 1u);
  EXPECT_MNEMO_ERROR(schedule_delta(model, user, agg, {}, kNow, cfg), ErrorCode::kEmptyCandidates);
  cfg.retention_threshold = 1.0;
  EXPECT_MNEMO_ERROR(validate(cfg), ErrorCode::kInvalidArgument);
  EXPECT_EQ(parse_policy_kind("threshold"), PolicyKind::kThreshold);
  EXPECT_MNEMO_ERROR(parse_policy_kind("random"), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace mnemo
