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

#include "mnemo/domain.hpp"

#include <algorithm>

#include "mnemo/error.hpp"

namespace mnemo {

void validate(const Flashcard& card) {
  if (card.card_id.empty()) throw Error(ErrorCode::kInvalidArgument, "flashcard has empty card_id");
  if (card.front_text.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "flashcard '" + card.card_id + "' has empty front_text");
  }
}

void validate(const StudyRecord& record) {
  if (record.user_id.empty()) throw Error(ErrorCode::kInvalidArgument, "study record has empty user_id");
  if (record.card_id.empty()) throw Error(ErrorCode::kInvalidArgument, "study record has empty card_id");
  if (record.elapsed_ms < 0) throw Error(ErrorCode::kInvalidArgument, "study record has negative elapsed_ms");
}

std::optional<Timestamp> StudyHistory::last_timestamp() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().record.timestamp;
}

StudyHistory append_record(StudyHistory history, Flashcard card, StudyRecord record) {
  validate(record);
  if (history.user_id_.empty()) {
    history.user_id_ = record.user_id;
  } else if (history.user_id_ != record.user_id) {
    throw Error(ErrorCode::kUserMismatch,
                "record for user '" + record.user_id + "' appended to history of '" + history.user_id_ + "'");
  }
  if (auto last = history.last_timestamp(); last && record.timestamp < *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "timestamp " + std::to_string(record.timestamp) + " precedes last " + std::to_string(*last));
  }
  if (card.card_id.empty()) {
    card.card_id = record.card_id;
  } else if (card.card_id != record.card_id) {
    throw Error(ErrorCode::kInvalidArgument,
                "card '" + card.card_id + "' paired with record for '" + record.card_id + "'");
  }
  history.entries_.push_back({std::move(card), std::move(record)});
  return history;
}

bool seen(const StudyHistory& history, std::string_view card_id) {
  return std::any_of(history.entries().begin(), history.entries().end(),
                     [&](const StudyHistory::Entry& e) { return e.record.card_id == card_id; });
}

}  // namespace mnemo
