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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mnemo {

// Transparent hasher so string-keyed maps accept string_view lookups.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerHour = 3600;
inline constexpr Timestamp kSecondsPerDay = 86400;

inline double hours_between(Timestamp from, Timestamp to) {
  return static_cast<double>(to - from) / static_cast<double>(kSecondsPerHour);
}

inline double days_between(Timestamp from, Timestamp to) {
  return static_cast<double>(to - from) / static_cast<double>(kSecondsPerDay);
}

struct Flashcard {
  std::string card_id;
  std::string front_text;
  std::string back_text;
  std::string deck_id;
  std::string deck_name;

  friend bool operator==(const Flashcard&, const Flashcard&) = default;
};

// Throws kInvalidArgument when card_id or front_text is empty.
void validate(const Flashcard& card);

struct StudyRecord {
  std::string user_id;
  std::string card_id;
  Timestamp timestamp = 0;
  bool correct = false;
  std::int64_t elapsed_ms = 0;
  std::string deck_id;

  friend bool operator==(const StudyRecord&, const StudyRecord&) = default;
};

// Throws kInvalidArgument for empty ids or negative elapsed_ms.
void validate(const StudyRecord& record);

/// Chronological log of one user's studies. Updated by replacement: every
/// mutation goes through append_record(), which returns a new history.
class StudyHistory {
 public:
  struct Entry {
    Flashcard card;
    StudyRecord record;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  StudyHistory() = default;
  explicit StudyHistory(std::string user_id) : user_id_(std::move(user_id)) {}

  const std::string& user_id() const { return user_id_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::optional<Timestamp> last_timestamp() const;

  friend StudyHistory append_record(StudyHistory history, Flashcard card,
                                    StudyRecord record);
  friend bool operator==(const StudyHistory&, const StudyHistory&) = default;

 private:
  std::string user_id_;
  std::vector<Entry> entries_;
};

// Errors: kOutOfOrderTimestamp when record precedes the last entry,
// kUserMismatch when record.user_id differs from the history's user. An
// unnamed (default-constructed) history adopts the first record's user.
// Same-second ties keep insertion order.
StudyHistory append_record(StudyHistory history, Flashcard card, StudyRecord record);

bool seen(const StudyHistory& history, std::string_view card_id);

}  // namespace mnemo
