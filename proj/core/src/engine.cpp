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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mnemo/error.hpp"
#include "mnemo/ingestion.hpp"
#include "mnemo/keyvalue.hpp"
#include "mnemo/service.hpp"

namespace mnemo {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::int64_t day_of(Timestamp t) { return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay); }

[[noreturn]] void unknown_user(std::string_view user_id) {
  throw Error(ErrorCode::kUnknownUser, "unknown user '" + std::string(user_id) + "'");
}

[[noreturn]] void phase_violation(const std::string& what) { throw Error(ErrorCode::kPhaseViolation, what); }

bool contains(const std::vector<std::string>& v, std::string_view s) { return std::find(v.begin(), v.end(), s) != v.end(); }

void digest_tally(std::ostream& out, const CardTally& t) { out << t.positive << '/' << t.negative; }

}  // namespace

std::string TestSession::phase_name() const {
  switch (phase) {
    case TestPhase::kPretest: return "pretest";
    case TestPhase::kDaily: return "daily-" + std::to_string(day);
    case TestPhase::kPosttest: return "posttest";
    case TestPhase::kDone: return "done";
  }
  return "done";
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string assign_scheduler(std::string_view user_id, int test_index) {
  const bool odd = ((fnv1a(user_id) & 1u) ^ (static_cast<unsigned>(test_index) & 1u)) != 0;
  return odd ? "fsrs-simplified" : "delta";
}

ThroughputReport throughput_report(const TestSession& session) {
  ThroughputReport r;
  r.scheduler = session.scheduler;
  auto accuracy = [](const auto& outcomes) {
    if (outcomes.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& [card, ok] : outcomes) correct += ok ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(outcomes.size());
  };
  r.pretest_accuracy = accuracy(session.pretest);
  r.posttest_accuracy = accuracy(session.posttest);
  std::int64_t all_ms = 0, correct_ms = 0;
  std::size_t n_all = 0, n_correct = 0;
  for (const auto& [card, ms] : session.posttest_ms) {
    all_ms += ms;
    ++n_all;
    if (auto it = session.posttest.find(card); it != session.posttest.end() && it->second) {
      correct_ms += ms;
      ++n_correct;
    }
  }
  if (n_all > 0) r.mean_seconds_all = static_cast<double>(all_ms) / static_cast<double>(n_all) / 1000.0;
  if (n_correct > 0) r.mean_seconds_correct = static_cast<double>(correct_ms) / static_cast<double>(n_correct) / 1000.0;
  if (r.mean_seconds_all && *r.mean_seconds_all > 0.0) {
    r.ttp = static_cast<double>(kTestSetSize) * r.posttest_accuracy / *r.mean_seconds_all;
  }
  return r;
}

struct Engine::UserSlot {
  mutable std::mutex mutex;
  UserState state;
  std::optional<TestSession> test;
  int tests_started = 0;
  std::map<std::string, RecordAck, std::less<>> acks;  // by idempotency key
};

struct Engine::Event {
  enum class Kind { kUserCreated, kStudy, kTestStart, kTestSchedule };
  Kind kind = Kind::kStudy;
  std::string user_id;
  Timestamp at = 0;
  std::string card_id;
  bool response = false;
  std::int64_t elapsed_ms = 0;
  std::string idempotency_key;
  std::string answer_text;
  bool test = false;
  int index = 0;
  int day = 0;
  std::string scheduler;
  std::vector<std::string> cards;

  std::string to_json(const Engine& engine) const {
    ordered_json j;
    switch (kind) {
      case Kind::kUserCreated:
        j["event"] = "user_created";
        j["user_id"] = user_id;
        j["at"] = at;
        break;
      case Kind::kStudy: {
        // Study rows use the dataset schema so the log doubles as a dataset.
        DatasetRow row;
        row.user_id = user_id;
        row.card_id = card_id;
        if (const Flashcard* c = engine.card(card_id)) row.deck_id = c->deck_id;
        row.response = response;
        row.utc_datetime = format_utc_datetime(at);
        row.elapsed_milliseconds = elapsed_ms;
        row.answer_text = answer_text;
        j = ordered_json::parse(row_to_json(row));
        j["timestamp"] = at;
        if (!idempotency_key.empty()) j["idempotency_key"] = idempotency_key;
        if (test) j["test"] = true;
        break;
      }
      case Kind::kTestStart:
        j["event"] = "test_start";
        j["user_id"] = user_id;
        j["at"] = at;
        j["index"] = index;
        j["scheduler"] = scheduler;
        j["cards"] = cards;
        break;
      case Kind::kTestSchedule:
        j["event"] = "test_schedule";
        j["user_id"] = user_id;
        j["at"] = at;
        j["day"] = day;
        j["cards"] = cards;
        break;
    }
    return j.dump();
  }

  static Event from_json(const std::string& line) {
    const json j = json::parse(line);
    Event e;
    e.user_id = j.at("user_id").get<std::string>();
    if (!j.contains("event")) {
      e.kind = Kind::kStudy;
      e.card_id = j.at("card_id").get<std::string>();
      e.response = j.at("response").get<int>() != 0;
      e.at = j.at("timestamp").get<Timestamp>();
      e.elapsed_ms = j.value("elapsed_milliseconds", std::int64_t{0});
      e.idempotency_key = j.value("idempotency_key", std::string());
      e.answer_text = j.value("answer_text", std::string());
      e.test = j.value("test", false);
      return e;
    }
    const std::string kind = j.at("event").get<std::string>();
    e.at = j.at("at").get<Timestamp>();
    if (kind == "user_created") {
      e.kind = Kind::kUserCreated;
    } else if (kind == "test_start") {
      e.kind = Kind::kTestStart;
      e.index = j.at("index").get<int>();
      e.scheduler = j.at("scheduler").get<std::string>();
      e.cards = j.at("cards").get<std::vector<std::string>>();
    } else if (kind == "test_schedule") {
      e.kind = Kind::kTestSchedule;
      e.day = j.at("day").get<int>();
      e.cards = j.at("cards").get<std::vector<std::string>>();
    } else {
      throw Error(ErrorCode::kMalformedRow, "unknown log event '" + kind + "'");
    }
    return e;
  }
};

Engine::Engine(std::vector<Flashcard> corpus, std::shared_ptr<const StudentModel> model, Options options)
    : corpus_(std::move(corpus)), model_(std::move(model)), options_(std::move(options)) {
  if (!model_) throw Error(ErrorCode::kInvalidArgument, "engine needs a student model");
  validate(options_.policy);
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    validate(corpus_[i]);
    if (!card_index_.emplace(corpus_[i].card_id, i).second) {
      throw Error(ErrorCode::kDuplicateCardId, "card '" + corpus_[i].card_id + "' listed twice");
    }
  }
  if (options_.log_path) {
    if (std::filesystem::exists(*options_.log_path)) replay(*options_.log_path);
    log_ = std::fopen(options_.log_path->c_str(), "ab");
    if (!log_) {
      throw Error(ErrorCode::kIoError, "cannot open log " + options_.log_path->string() + ": " + std::strerror(errno));
    }
  }
}

Engine::~Engine() {
  if (log_) std::fclose(log_);
}

void Engine::replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read log " + path.string());
  std::string line;
  std::size_t n = 0;
  std::uintmax_t good_bytes = 0;
  while (std::getline(in, line)) {
    ++n;
    const bool complete = !in.eof();
    if (line.empty()) {
      good_bytes += 1;
      continue;
    }
    Event e;
    try {
      e = Event::from_json(line);
    } catch (const std::exception& ex) {
      // A torn final write is dropped; anything else is corruption.
      if (!complete) break;
      throw Error(ErrorCode::kMalformedRow, path.string() + " line " + std::to_string(n) + ": " + ex.what());
    }
    if (!complete) break;
    apply(e);
    good_bytes += line.size() + 1;
  }
  if (good_bytes != std::filesystem::file_size(path)) std::filesystem::resize_file(path, good_bytes);
}

void Engine::append(const Event& event) {
  if (!log_) return;
  const std::string line = event.to_json(*this) + '\n';
  std::lock_guard lock(log_mutex_);
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0) {
    throw Error(ErrorCode::kIoError, "failed to append to the study log");
  }
  if (options_.sync_writes && ::fsync(::fileno(log_)) != 0) {
    throw Error(ErrorCode::kIoError, "failed to sync the study log");
  }
}

Engine::UserSlot* Engine::find_slot(std::string_view user_id) const {
  std::shared_lock lock(users_mutex_);
  auto it = users_.find(user_id);
  return it == users_.end() ? nullptr : it->second.get();
}

Engine::UserSlot& Engine::slot(std::string_view user_id) const {
  UserSlot* s = find_slot(user_id);
  if (!s) unknown_user(user_id);
  return *s;
}

void Engine::apply(const Event& e) {
  switch (e.kind) {
    case Event::Kind::kUserCreated: {
      std::unique_lock lock(users_mutex_);
      if (!users_.count(e.user_id)) {
        auto s = std::make_unique<UserSlot>();
        s->state = UserState(e.user_id);
        users_.emplace(e.user_id, std::move(s));
      }
      return;
    }
    case Event::Kind::kStudy:
      apply_study(slot(e.user_id), e);
      return;
    case Event::Kind::kTestStart: {
      UserSlot& s = slot(e.user_id);
      TestSession t;
      t.user_id = e.user_id;
      t.index = e.index;
      t.cards = e.cards;
      t.scheduler = e.scheduler;
      t.start_day = day_of(e.at);
      s.test = std::move(t);
      s.tests_started = e.index + 1;
      s.state.freeze_user_aggregates();
      return;
    }
    case Event::Kind::kTestSchedule: {
      UserSlot& s = slot(e.user_id);
      if (!s.test) throw Error(ErrorCode::kMalformedRow, "test schedule without a test session");
      s.test->daily_cards = e.cards;
      s.test->answered.clear();
      return;
    }
  }
}

void Engine::apply_study(UserSlot& s, const Event& e) {
  s.state.apply(StudyRecord{e.user_id, e.card_id, e.at, e.response, e.elapsed_ms, card(e.card_id)->deck_id});
  {
    std::unique_lock lock(cards_mutex_);
    aggregates_.add(e.card_id, e.response);
  }
  if (!e.idempotency_key.empty()) s.acks[e.idempotency_key] = {true, s.state.record_count(), e.at};
  if (!e.test || !s.test) return;

  TestSession& t = *s.test;
  t.answered.push_back(e.card_id);
  switch (t.phase) {
    case TestPhase::kPretest:
      t.pretest[e.card_id] = e.response;
      if (t.answered.size() == t.cards.size()) {
        t.phase = TestPhase::kDaily;
        t.day = 1;
        t.daily_cards.clear();
        t.answered.clear();
      }
      break;
    case TestPhase::kDaily:
      if (t.answered.size() == t.daily_cards.size()) {
        t.daily_cards.clear();
        t.answered.clear();
        if (t.day == kDailyPhases) {
          t.phase = TestPhase::kPosttest;
        } else {
          ++t.day;
        }
      }
      break;
    case TestPhase::kPosttest:
      t.posttest[e.card_id] = e.response;
      t.posttest_ms[e.card_id] = e.elapsed_ms;
      if (t.answered.size() == t.cards.size()) {
        t.phase = TestPhase::kDone;
        t.answered.clear();
        s.state.thaw_user_aggregates();
      }
      break;
    case TestPhase::kDone:
      break;
  }
}

bool Engine::create_user(std::string_view user_id, Timestamp now) {
  if (user_id.empty()) throw Error(ErrorCode::kInvalidArgument, "user_id is empty");
  std::lock_guard create(create_mutex_);
  if (find_slot(user_id)) return false;
  Event e;
  e.kind = Event::Kind::kUserCreated;
  e.user_id = std::string(user_id);
  e.at = now;
  append(e);
  apply(e);
  return true;
}

bool Engine::has_user(std::string_view user_id) const { return find_slot(user_id) != nullptr; }

const Flashcard* Engine::card(std::string_view card_id) const {
  auto it = card_index_.find(card_id);
  return it == card_index_.end() ? nullptr : &corpus_[it->second];
}

RecordAck Engine::record_study(const StudyRequest& request, Timestamp now) {
  UserSlot& s = slot(request.user_id);
  if (!card(request.card_id)) {
    throw Error(ErrorCode::kUnknownCard, "unknown card '" + request.card_id + "'");
  }
  if (request.elapsed_ms < 0) throw Error(ErrorCode::kInvalidArgument, "elapsed_ms must be non-negative");
  std::lock_guard lock(s.mutex);
  if (!request.idempotency_key.empty()) {
    if (auto it = s.acks.find(request.idempotency_key); it != s.acks.end()) {
      RecordAck ack = it->second;
      ack.applied = false;
      return ack;
    }
  }
  Event e;
  e.kind = Event::Kind::kStudy;
  e.user_id = request.user_id;
  e.card_id = request.card_id;
  e.response = request.response;
  e.elapsed_ms = request.elapsed_ms;
  e.at = request.timestamp.value_or(now);
  e.idempotency_key = request.idempotency_key;
  e.answer_text = request.answer_text;
  if (auto last = s.state.last_timestamp(); last && e.at < *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "timestamp " + std::to_string(e.at) + " precedes last record " + std::to_string(*last));
  }
  append(e);
  apply_study(s, e);
  return {true, s.state.record_count(), e.at};
}

std::vector<std::string> Engine::deck_cards(std::string_view deck) const {
  std::vector<std::string> out;
  for (const Flashcard& c : corpus_) {
    if (deck.empty() || c.deck_id == deck) out.push_back(c.card_id);
  }
  return out;
}

ScheduleResult Engine::schedule(std::string_view user_id, std::string_view deck, std::size_t n, PolicyKind policy,
                                Timestamp now) const {
  UserSlot& s = slot(user_id);
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n must be positive");
  std::lock_guard lock(s.mutex);
  std::vector<std::string> candidates;
  for (std::string& id : deck_cards(deck)) {
    const UserCardState* uc = s.state.card(id);
    if (uc && s.state.session_tally(*uc, now).total() > 0) continue;
    candidates.push_back(std::move(id));
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kEmptyCandidates, "no cards left to schedule in deck '" + std::string(deck) + "'");
  }
  PolicyConfig config = options_.policy;
  config.n_cards = n;
  config.kind = policy;
  std::shared_lock cards(cards_mutex_);
  ScheduleResult out;
  out.user_id = std::string(user_id);
  out.policy = policy;
  out.cards = mnemo::schedule(*model_, s.state, aggregates_, candidates, now, config);
  return out;
}

double Engine::predict(std::string_view user_id, std::string_view card_id, Timestamp now) const {
  UserSlot& s = slot(user_id);
  if (!card(card_id)) throw Error(ErrorCode::kUnknownCard, "unknown card '" + std::string(card_id) + "'");
  std::lock_guard lock(s.mutex);
  std::shared_lock cards(cards_mutex_);
  return model_->predict(s.state, aggregates_, card_id, now);
}

ForgettingCurve Engine::curve(std::string_view user_id, std::string_view card_id, Timestamp now) const {
  UserSlot& s = slot(user_id);
  if (!card(card_id)) throw Error(ErrorCode::kUnknownCard, "unknown card '" + std::string(card_id) + "'");
  std::lock_guard lock(s.mutex);
  std::shared_lock cards(cards_mutex_);
  return forgetting_curve(*model_, s.state, aggregates_, card_id, now);
}

UserStats Engine::stats(std::string_view user_id, Timestamp now) const {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  UserStats out;
  out.user_id = std::string(user_id);
  out.records = s.state.record_count();
  out.totals = s.state.totals();
  out.cards_seen = s.state.cards().size();
  out.session = s.state.session_totals(now);
  if (s.test) out.test_phase = s.test->phase_name();
  return out;
}

TestSession Engine::test_start(std::string_view user_id, std::string_view deck, std::span<const std::string> cards,
                               Timestamp now) {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  if (s.test && s.test->phase != TestPhase::kDone) {
    phase_violation("user '" + std::string(user_id) + "' already has a test in phase " + s.test->phase_name());
  }
  if (auto last = s.state.last_timestamp(); last && now < *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp, "test start precedes the user's last record");
  }
  Event e;
  e.kind = Event::Kind::kTestStart;
  e.user_id = std::string(user_id);
  e.at = now;
  e.index = s.tests_started;
  e.scheduler = assign_scheduler(user_id, e.index);
  if (!cards.empty()) {
    std::vector<std::string> unique(cards.begin(), cards.end());
    std::sort(unique.begin(), unique.end());
    if (std::adjacent_find(unique.begin(), unique.end()) != unique.end() || cards.size() != kTestSetSize) {
      throw Error(ErrorCode::kInvalidArgument, "a test set needs exactly 20 distinct cards");
    }
    for (const std::string& id : cards) {
      if (!card(id)) throw Error(ErrorCode::kUnknownCard, "unknown card '" + id + "'");
    }
    e.cards.assign(cards.begin(), cards.end());
  } else {
    std::vector<std::pair<std::uint64_t, std::string>> ranked;
    const std::string prefix = std::string(user_id) + '|' + std::to_string(e.index) + '|';
    for (std::string& id : deck_cards(deck)) {
      if (s.state.card(id)) continue;
      ranked.emplace_back(fnv1a(prefix + id), std::move(id));
    }
    if (ranked.size() < kTestSetSize) {
      throw Error(ErrorCode::kEmptyCandidates, "deck '" + std::string(deck) + "' has fewer than 20 unseen cards");
    }
    std::partial_sort(ranked.begin(), ranked.begin() + kTestSetSize, ranked.end());
    for (std::size_t i = 0; i < kTestSetSize; ++i) e.cards.push_back(ranked[i].second);
  }
  append(e);
  apply(e);
  return *s.test;
}

void Engine::check_phase_open(const TestSession& t, Timestamp now) const {
  const std::int64_t today = day_of(now);
  switch (t.phase) {
    case TestPhase::kPretest:
      return;
    case TestPhase::kDaily:
      if (today < t.start_day + (t.day - 1)) phase_violation(t.phase_name() + " opens on test day " + std::to_string(t.day));
      return;
    case TestPhase::kPosttest:
      if (today < t.start_day + kDailyPhases) phase_violation("posttest opens on test day 6");
      return;
    case TestPhase::kDone:
      phase_violation("test already finished");
  }
}

std::vector<std::string> Engine::plan_daily(const UserSlot& s, Timestamp now) const {
  const TestSession& t = *s.test;
  PolicyConfig config = options_.policy;
  config.n_cards = kDailyReviewSize;
  std::shared_lock cards(cards_mutex_);
  std::vector<ScheduledCard> picked;
  if (t.scheduler == "delta") {
    config.kind = PolicyKind::kDelta;
    picked = schedule_delta(*model_, s.state, aggregates_, t.cards, now, config);
  } else {
    config.kind = PolicyKind::kThreshold;
    config.retention_threshold = kFsrsRetentionTarget;
    picked = schedule_threshold(fsrs_, s.state, aggregates_, t.cards, now, config);
  }
  std::vector<std::string> out;
  for (ScheduledCard& c : picked) out.push_back(std::move(c.card_id));
  return out;
}

TestNext Engine::test_next(std::string_view user_id, Timestamp now) {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  if (!s.test) phase_violation("user '" + std::string(user_id) + "' has no test session");
  TestSession& t = *s.test;
  TestNext out;
  out.phase = t.phase_name();
  out.day = t.phase == TestPhase::kDaily ? t.day : 0;
  if (t.phase == TestPhase::kDone) return out;
  std::int64_t opens = t.start_day;
  if (t.phase == TestPhase::kDaily) opens += t.day - 1;
  if (t.phase == TestPhase::kPosttest) opens += kDailyPhases;
  if (day_of(now) < opens) {
    out.available_at = opens * kSecondsPerDay;
    return out;
  }
  if (t.phase == TestPhase::kDaily && t.daily_cards.empty()) {
    if (auto last = s.state.last_timestamp(); last && now < *last) {
      throw Error(ErrorCode::kOutOfOrderTimestamp, "request clock precedes the user's last record");
    }
    Event e;
    e.kind = Event::Kind::kTestSchedule;
    e.user_id = std::string(user_id);
    e.at = now;
    e.day = t.day;
    e.cards = plan_daily(s, now);
    append(e);
    apply(e);
  }
  const std::vector<std::string>& pool = t.phase == TestPhase::kDaily ? t.daily_cards : t.cards;
  for (const std::string& id : pool) {
    if (!contains(t.answered, id)) out.cards.push_back(id);
  }
  return out;
}

RecordAck Engine::test_submit(const StudyRequest& request, Timestamp now) {
  UserSlot& s = slot(request.user_id);
  if (!card(request.card_id)) throw Error(ErrorCode::kUnknownCard, "unknown card '" + request.card_id + "'");
  if (request.elapsed_ms < 0) throw Error(ErrorCode::kInvalidArgument, "elapsed_ms must be non-negative");
  std::lock_guard lock(s.mutex);
  if (!request.idempotency_key.empty()) {
    if (auto it = s.acks.find(request.idempotency_key); it != s.acks.end()) {
      RecordAck ack = it->second;
      ack.applied = false;
      return ack;
    }
  }
  if (!s.test) phase_violation("user '" + request.user_id + "' has no test session");
  const TestSession& t = *s.test;
  const Timestamp at = request.timestamp.value_or(now);
  check_phase_open(t, at);
  if (t.phase == TestPhase::kDaily && t.daily_cards.empty()) {
    phase_violation("fetch the daily cards before submitting");
  }
  const std::vector<std::string>& pool = t.phase == TestPhase::kDaily ? t.daily_cards : t.cards;
  if (!contains(pool, request.card_id)) {
    phase_violation("card '" + request.card_id + "' is not part of " + t.phase_name());
  }
  if (contains(t.answered, request.card_id)) {
    phase_violation("card '" + request.card_id + "' was already answered in " + t.phase_name());
  }
  if (auto last = s.state.last_timestamp(); last && at < *last) {
    throw Error(ErrorCode::kOutOfOrderTimestamp,
                "timestamp " + std::to_string(at) + " precedes last record " + std::to_string(*last));
  }
  Event e;
  e.kind = Event::Kind::kStudy;
  e.user_id = request.user_id;
  e.card_id = request.card_id;
  e.response = request.response;
  e.elapsed_ms = request.elapsed_ms;
  e.at = at;
  e.idempotency_key = request.idempotency_key;
  e.answer_text = request.answer_text;
  e.test = true;
  append(e);
  apply_study(s, e);
  return {true, s.state.record_count(), e.at};
}

ThroughputReport Engine::test_report(std::string_view user_id) const {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  if (!s.test) phase_violation("user '" + std::string(user_id) + "' has no test session");
  if (s.test->phase != TestPhase::kDone) phase_violation("test still in phase " + s.test->phase_name());
  return throughput_report(*s.test);
}

std::optional<TestSession> Engine::test_session(std::string_view user_id) const {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  return s.test;
}

std::size_t Engine::user_count() const {
  std::shared_lock lock(users_mutex_);
  return users_.size();
}

std::uint64_t Engine::total_records() const {
  std::shared_lock lock(users_mutex_);
  std::uint64_t n = 0;
  for (const auto& [id, s] : users_) {
    std::lock_guard user_lock(s->mutex);
    n += s->state.record_count();
  }
  return n;
}

UserState Engine::user_state(std::string_view user_id) const {
  UserSlot& s = slot(user_id);
  std::lock_guard lock(s.mutex);
  return s.state;
}

std::string Engine::state_digest() const {
  std::ostringstream out;
  std::shared_lock lock(users_mutex_);
  for (const auto& [id, s] : users_) {
    std::lock_guard user_lock(s->mutex);
    const UserState& st = s->state;
    out << "user " << id << " records=" << st.record_count() << " totals=";
    digest_tally(out, st.totals());
    if (st.frozen_totals()) {
      out << " frozen=";
      digest_tally(out, *st.frozen_totals());
    }
    if (st.last_timestamp()) out << " last=" << *st.last_timestamp();
    out << '\n';
    for (const UserCardState& c : st.cards()) {
      out << "  card " << c.card_id << ' ';
      digest_tally(out, c.tally);
      out << " last=" << c.last_study << " prev=" << c.previous_study << " lc=" << c.last_correct
          << " box=" << c.leitner_box << " ef=" << format_double(c.sm2.efactor)
          << " iv=" << format_double(c.sm2.interval_days) << " rep=" << c.sm2.repetition
          << " seq=" << c.last_sequence << " session=" << c.session << ' ';
      digest_tally(out, c.session_tally);
      out << " studies=" << c.studies.size() << '\n';
    }
    for (const auto& [key, ack] : s->acks) out << "  ack " << key << ' ' << ack.record_count << ' ' << ack.timestamp << '\n';
    out << "  tests_started=" << s->tests_started << '\n';
    if (s->test) {
      const TestSession& t = *s->test;
      out << "  test phase=" << t.phase_name() << " scheduler=" << t.scheduler << " start=" << t.start_day
          << " cards=" << t.cards.size() << " daily=" << t.daily_cards.size() << " answered=" << t.answered.size()
          << " pre=" << t.pretest.size() << " post=" << t.posttest.size() << '\n';
    }
  }
  std::shared_lock cards(cards_mutex_);
  std::vector<std::pair<std::string, CardTally>> tallies(aggregates_.tallies().begin(), aggregates_.tallies().end());
  std::sort(tallies.begin(), tallies.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [id, t] : tallies) {
    out << "aggregate " << id << ' ';
    digest_tally(out, t);
    out << '\n';
  }
  return out.str();
}

}  // namespace mnemo
