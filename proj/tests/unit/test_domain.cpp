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

#include "mnemo/domain.hpp"
#include "mnemo/error.hpp"
#include "test_util.hpp"

namespace mnemo {
namespace {

StudyRecord rec(std::string user, std::string card, Timestamp t, bool ok = true) {
  return StudyRecord{std::move(user), std::move(card), t, ok, 1000, "d"};
}

TEST(Domain, AppendReturnsNewHistoryAndKeepsOriginal) {
  StudyHistory empty;
  StudyHistory one = append_record(empty, {}, rec("u", "a", 10));
  EXPECT_TRUE(empty.empty());
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.user_id(), "u");
  EXPECT_EQ(one.entries()[0].card.card_id, "a");
  EXPECT_EQ(one.last_timestamp(), 10);
}

TEST(Domain, OutOfOrderRejected) {
  StudyHistory h = append_record({}, {}, rec("u", "a", 10));
  EXPECT_MNEMO_ERROR(append_record(h, {}, rec("u", "b", 9)), ErrorCode::kOutOfOrderTimestamp);
}

TEST(Domain, SameSecondTiesKeepInsertionOrder) {
  StudyHistory h = append_record({}, {}, rec("u", "a", 10));
  h = append_record(h, {}, rec("u", "b", 10));
  EXPECT_EQ(h.entries()[0].record.card_id, "a");
  EXPECT_EQ(h.entries()[1].record.card_id, "b");
}

TEST(Domain, UserMismatchRejected) {
  StudyHistory h = append_record(StudyHistory("u"), {}, rec("u", "a", 1));
  EXPECT_MNEMO_ERROR(append_record(h, {}, rec("v", "a", 2)), ErrorCode::kUserMismatch);
}

TEST(Domain, CardRecordPairingChecked) {
  Flashcard card{"x", "front", "back", "d", "deck"};
  EXPECT_MNEMO_ERROR(append_record({}, card, rec("u", "a", 1)), ErrorCode::kInvalidArgument);
}

TEST(Domain, ValidationErrors) {
  EXPECT_MNEMO_ERROR(validate(Flashcard{"", "f", "", "", ""}), ErrorCode::kInvalidArgument);
  EXPECT_MNEMO_ERROR(validate(Flashcard{"c", "", "", "", ""}), ErrorCode::kInvalidArgument);
  StudyRecord r = rec("u", "c", 1);
  r.elapsed_ms = -1;
  EXPECT_MNEMO_ERROR(validate(r), ErrorCode::kInvalidArgument);
}

TEST(Domain, SeenReflectsHistory) {
  StudyHistory h = append_record({}, {}, rec("u", "a", 1));
  EXPECT_TRUE(seen(h, "a"));
  EXPECT_FALSE(seen(h, "b"));
}

TEST(Domain, TimeHelpers) {
  EXPECT_DOUBLE_EQ(hours_between(0, 5400), 1.5);
  EXPECT_DOUBLE_EQ(days_between(0, 43200), 0.5);
}

TEST(Domain, ErrorCodeNamesAreSnakeCase) {
  EXPECT_EQ(to_string(ErrorCode::kOutOfOrderTimestamp), "out_of_order_timestamp");
  EXPECT_EQ(to_string(ErrorCode::kUnknownUser), "unknown_user");
}

}  // namespace
}  // namespace mnemo
