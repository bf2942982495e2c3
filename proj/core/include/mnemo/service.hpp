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
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mnemo/baselines.hpp"
#include "mnemo/domain.hpp"
#include "mnemo/error.hpp"
#include "mnemo/eval.hpp"
#include "mnemo/features.hpp"
#include "mnemo/policy.hpp"
#include "mnemo/student_model.hpp"

namespace mnemo {

inline constexpr std::size_t kTestSetSize = 20;
inline constexpr std::size_t kDailyReviewSize = 10;
inline constexpr int kDailyPhases = 5;
inline constexpr double kFsrsRetentionTarget = 0.9;

enum class TestPhase : std::uint8_t { kPretest, kDaily, kPosttest, kDone };

struct TestSession {
  std::string user_id;
  int index = 0;                      // 0-based count of the user's earlier test sessions
  std::vector<std::string> cards;     // the 20-card test set
  std::string scheduler;              // "delta" or "fsrs-simplified"
  TestPhase phase = TestPhase::kPretest;
  int day = 0;                        // current daily phase, 1..5
  std::int64_t start_day = 0;         // UTC day number of the start
  std::vector<std::string> daily_cards;  // fixed once the daily phase is scheduled
  std::vector<std::string> answered;     // within the current phase
  std::map<std::string, bool, std::less<>> pretest;
  std::map<std::string, bool, std::less<>> posttest;
  std::map<std::string, std::int64_t, std::less<>> posttest_ms;

  std::string phase_name() const;
};

struct ThroughputReport {
  double pretest_accuracy = 0.0;
  double posttest_accuracy = 0.0;
  std::optional<double> mean_seconds_correct;  // posttest answers that were correct
  std::optional<double> mean_seconds_all;      // all posttest answers
  std::optional<double> ttp;                   // 20 * posttest accuracy / mean_seconds_all
  std::string scheduler;
};

ThroughputReport throughput_report(const TestSession& session);

// Scheduler assignment: parity of FNV-1a(user_id) XOR parity of the test index.
std::string assign_scheduler(std::string_view user_id, int test_index);
std::uint64_t fnv1a(std::string_view text);

struct StudyRequest {
  std::string user_id;
  std::string card_id;
  bool response = false;
  std::int64_t elapsed_ms = 0;
  std::optional<Timestamp> timestamp;  // defaults to the request clock
  std::string idempotency_key;
  std::string answer_text;
};

struct RecordAck {
  bool applied = false;  // false when the idempotency key was already used
  std::uint64_t record_count = 0;
  Timestamp timestamp = 0;
};

struct ScheduleResult {
  std::string user_id;
  PolicyKind policy = PolicyKind::kDelta;
  std::vector<ScheduledCard> cards;
};

struct UserStats {
  std::string user_id;
  std::uint64_t records = 0;
  CardTally totals;
  std::size_t cards_seen = 0;
  CardTally session;
  std::optional<std::string> test_phase;
};

struct TestNext {
  std::string phase;
  int day = 0;
  std::vector<std::string> cards;      // still to answer in this phase
  std::optional<Timestamp> available_at;  // set when the phase is not open yet
};

/// In-process engine behind the HTTP API. Every mutation is logged (and
/// flushed) before it is applied and acknowledged; constructing an engine on
/// an existing log replays it.
class Engine {
 public:
  struct Options {
    std::optional<std::filesystem::path> log_path;
    bool sync_writes = true;  // fsync after each appended event
    PolicyConfig policy;
  };

  Engine(std::vector<Flashcard> corpus, std::shared_ptr<const StudentModel> model, Options options);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Returns false when the user already existed.
  bool create_user(std::string_view user_id, Timestamp now);
  bool has_user(std::string_view user_id) const;

  // Errors: kUnknownUser, kUnknownCard, kOutOfOrderTimestamp.
  RecordAck record_study(const StudyRequest& request, Timestamp now);

  // Cards of `deck` (all cards when empty) minus those already shown in the
  // open session. Errors: kUnknownUser, kEmptyCandidates.
  ScheduleResult schedule(std::string_view user_id, std::string_view deck, std::size_t n, PolicyKind policy,
                          Timestamp now) const;
  double predict(std::string_view user_id, std::string_view card_id, Timestamp now) const;
  ForgettingCurve curve(std::string_view user_id, std::string_view card_id, Timestamp now) const;
  UserStats stats(std::string_view user_id, Timestamp now) const;

  // Test mode. The test set is `cards` when given, otherwise the 20 cards of
  // `deck` the user has not studied with the smallest FNV-1a(user|index|card).
  TestSession test_start(std::string_view user_id, std::string_view deck, std::span<const std::string> cards,
                         Timestamp now);
  TestNext test_next(std::string_view user_id, Timestamp now);
  RecordAck test_submit(const StudyRequest& request, Timestamp now);
  ThroughputReport test_report(std::string_view user_id) const;
  std::optional<TestSession> test_session(std::string_view user_id) const;

  const Flashcard* card(std::string_view card_id) const;
  const StudentModel& model() const { return *model_; }
  std::size_t user_count() const;
  std::uint64_t total_records() const;
  UserState user_state(std::string_view user_id) const;

  // Canonical text of all derived state; equal engines produce equal text.
  std::string state_digest() const;

 private:
  struct UserSlot;
  struct Event;

  UserSlot& slot(std::string_view user_id) const;
  UserSlot* find_slot(std::string_view user_id) const;
  void append(const Event& event);
  void apply(const Event& event);
  void apply_study(UserSlot& slot, const Event& event);
  void replay(const std::filesystem::path& path);
  std::vector<std::string> deck_cards(std::string_view deck) const;
  std::vector<std::string> plan_daily(const UserSlot& slot, Timestamp now) const;
  void check_phase_open(const TestSession& session, Timestamp now) const;

  std::vector<Flashcard> corpus_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> card_index_;
  std::shared_ptr<const StudentModel> model_;
  FsrsModel fsrs_;
  Options options_;

  mutable std::shared_mutex users_mutex_;
  std::map<std::string, std::unique_ptr<UserSlot>, std::less<>> users_;
  mutable std::shared_mutex cards_mutex_;
  CardAggregates aggregates_;
  std::mutex log_mutex_;
  std::mutex create_mutex_;
  std::FILE* log_ = nullptr;
};

/// HTTP front end over an Engine.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  bool test_clock = false;  // honour X-Clock-Override (UTC seconds)
};

class HttpServer {
 public:
  HttpServer(Engine& engine, ServiceConfig config);
  ~HttpServer();

  // Binds the socket; returns the bound port. Throws kIoError.
  int bind();
  // Serves until stop(); call bind() first.
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace mnemo
