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
#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "mnemo/service.hpp"

namespace mnemo {
namespace {

using nlohmann::json;
using testing::make_corpus;

constexpr Timestamp kDay0 = 1700006400;

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override { start(true); }
  void TearDown() override { shutdown(); }

  void start(bool test_clock) {
    engine_ = std::make_unique<Engine>(make_corpus(60), std::make_shared<HlrModel>(HlrWeights{3.0, 1.0, -0.5}),
                                       Engine::Options{});
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.test_clock = test_clock;
    server_ = std::make_unique<HttpServer>(*engine_, cfg);
    port_ = server_->bind();
    thread_ = std::thread([this] { server_->run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void shutdown() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
    engine_.reset();
  }

  httplib::Headers at(Timestamp t) const { return {{"X-Clock-Override", std::to_string(t)}}; }

  std::pair<int, json> get(const std::string& path, Timestamp t = kDay0) {
    auto res = client_->Get(path, at(t));
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> post(const std::string& path, const json& body, Timestamp t = kDay0) {
    auto res = client_->Post(path, at(t), body.dump(), "application/json");
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  std::unique_ptr<Engine> engine_;
  std::unique_ptr<HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::kUnknownUser), 404);
  EXPECT_EQ(http_status(ErrorCode::kUnknownCard), 404);
  EXPECT_EQ(http_status(ErrorCode::kOutOfOrderTimestamp), 409);
  EXPECT_EQ(http_status(ErrorCode::kPhaseViolation), 409);
  EXPECT_EQ(http_status(ErrorCode::kEmptyCandidates), 422);
  EXPECT_EQ(http_status(ErrorCode::kInvalidArgument), 400);
  EXPECT_EQ(http_status(ErrorCode::kIoError), 500);
}

TEST_F(HttpTest, UsersAndRecords) {
  auto [s1, b1] = post("/api/v1/users", {{"user_id", "ana"}});
  EXPECT_EQ(s1, 201);
  EXPECT_EQ(b1["version"], "v1");
  EXPECT_EQ(b1["created"], true);
  auto [s2, b2] = post("/api/v1/users", {{"user_id", "ana"}});
  EXPECT_EQ(s2, 200);
  EXPECT_EQ(b2["created"], false);

  auto [s3, b3] = post("/api/v1/record",
                       {{"user_id", "ana"}, {"card_id", "k001"}, {"response", true}, {"elapsed_ms", 1200},
                        {"idempotency_key", "x1"}},
                       kDay0 + 60);
  EXPECT_EQ(s3, 200);
  EXPECT_EQ(b3["applied"], true);
  EXPECT_EQ(b3["record_count"], 1);
  EXPECT_EQ(b3["timestamp"], kDay0 + 60);
  auto [s4, b4] = post("/api/v1/record",
                       {{"user_id", "ana"}, {"card_id", "k001"}, {"response", 1}, {"idempotency_key", "x1"}},
                       kDay0 + 70);
  EXPECT_EQ(s4, 200);
  EXPECT_EQ(b4["applied"], false);

  auto [s5, b5] = get("/api/v1/stats?user=ana", kDay0 + 80);
  EXPECT_EQ(s5, 200);
  EXPECT_EQ(b5["records"], 1);
  EXPECT_EQ(b5["correct"], 1);
  EXPECT_EQ(b5["session_records"], 1);
  EXPECT_TRUE(b5["test_phase"].is_null());
}

TEST_F(HttpTest, ErrorsCarryCodes) {
  auto [s1, b1] = get("/api/v1/stats?user=ghost");
  EXPECT_EQ(s1, 404);
  EXPECT_EQ(b1["error"]["code"], "unknown_user");
  EXPECT_EQ(b1["version"], "v1");
  post("/api/v1/users", {{"user_id", "ana"}});
  auto [s2, b2] = post("/api/v1/record", {{"user_id", "ana"}, {"card_id", "nope"}, {"response", true}});
  EXPECT_EQ(s2, 404);
  EXPECT_EQ(b2["error"]["code"], "unknown_card");
  post("/api/v1/record", {{"user_id", "ana"}, {"card_id", "k001"}, {"response", true}}, kDay0 + 100);
  auto [s3, b3] = post("/api/v1/record", {{"user_id", "ana"}, {"card_id", "k002"}, {"response", true}}, kDay0 + 50);
  EXPECT_EQ(s3, 409);
  EXPECT_EQ(b3["error"]["code"], "out_of_order_timestamp");
  auto [s4, b4] = get("/api/v1/predict?user=ana");
  EXPECT_EQ(s4, 400);
  auto res = client_->Post("/api/v1/users", at(kDay0), "{oops", "application/json");
  EXPECT_EQ(res->status, 400);
  auto [s5, b5] = get("/api/v1/nowhere");
  EXPECT_EQ(s5, 404);
  EXPECT_TRUE(b5.contains("error"));
  auto [s6, b6] = get("/api/v1/schedule?user=ana&policy=random");
  EXPECT_EQ(s6, 400);
  auto [s7, b7] = get("/api/v1/test/report?user=ana");
  EXPECT_EQ(s7, 409);
  EXPECT_EQ(b7["error"]["code"], "phase_violation");
}

TEST_F(HttpTest, ScheduleAndPredictPayloads) {
  post("/api/v1/users", {{"user_id", "ana"}});
  auto [s1, b1] = get("/api/v1/schedule?user=ana&deck=deck1&n=3");
  ASSERT_EQ(s1, 200);
  EXPECT_EQ(b1["policy"], "delta");
  EXPECT_EQ(b1["model"], "hlr");
  ASSERT_EQ(b1["cards"].size(), 3u);
  for (const auto& c : b1["cards"]) {
    const auto& d = c["delta"];
    const double p = d["p_now"];
    EXPECT_NEAR(d["score"].get<double>(),
                d["p_correct"].get<double>() * p + d["p_incorrect"].get<double>() * (1 - p) - d["p_no_study"].get<double>(),
                1e-12);
  }
  auto [s2, b2] = get("/api/v1/schedule?user=ana&policy=threshold&n=100");
  EXPECT_EQ(b2["cards"].size(), 60u);
  EXPECT_FALSE(b2["cards"][0].contains("delta"));

  post("/api/v1/record", {{"user_id", "ana"}, {"card_id", "k003"}, {"response", true}}, kDay0 + 10);
  auto [s3, b3] = get("/api/v1/predict?user=ana&card=k003", kDay0 + 3600);
  EXPECT_EQ(s3, 200);
  EXPECT_EQ(b3["seen"], true);
  EXPECT_EQ(b3["at"], kDay0 + 3600);
  EXPECT_DOUBLE_EQ(b3["probability"].get<double>(), engine_->predict("ana", "k003", kDay0 + 3600));

  auto [s4, b4] = get("/api/v1/curve?user=ana&card=k003", kDay0 + 3600);
  EXPECT_EQ(s4, 200);
  ASSERT_EQ(b4["points"].size(), 21u);
  EXPECT_EQ(b4["points"][0]["probability"], b3["probability"]);
  for (std::size_t d = 1; d < 21; ++d) {
    EXPECT_LE(b4["points"][d]["probability"].get<double>(), b4["points"][d - 1]["probability"].get<double>());
  }
}

TEST_F(HttpTest, SixDayProtocol) {
  post("/api/v1/users", {{"user_id", "bo"}});
  Timestamp t = kDay0 + 9 * 3600;
  auto [s0, b0] = post("/api/v1/test/start", {{"user_id", "bo"}, {"deck", "deck0"}}, t);
  ASSERT_EQ(s0, 201);
  EXPECT_EQ(b0["phase"], "pretest");
  EXPECT_EQ(b0["scheduler"], assign_scheduler("bo", 0));
  ASSERT_EQ(b0["cards"].size(), 20u);
  auto submit = [&](const std::string& card, bool ok, int ms, Timestamp when) {
    return post("/api/v1/test/submit", {{"user_id", "bo"}, {"card_id", card}, {"response", ok}, {"elapsed_ms", ms}},
                when);
  };
  for (const auto& c : b0["cards"]) EXPECT_EQ(submit(c, false, 2000, ++t).first, 200);
  for (int day = 1; day <= 5; ++day) {
    t = std::max(t, kDay0 + (day - 1) * 86400 + 10 * 3600);
    auto [s, b] = get("/api/v1/test/next?user=bo", t);
    ASSERT_EQ(s, 200);
    EXPECT_EQ(b["phase"], "daily-" + std::to_string(day));
    ASSERT_EQ(b["cards"].size(), 10u);
    for (const auto& c : b["cards"]) EXPECT_EQ(submit(c, true, 3000, ++t).first, 200);
  }
  auto [sp, bp] = submit(b0["cards"][0], true, 5000, t + 5);
  EXPECT_EQ(sp, 409);
  t = kDay0 + 5 * 86400 + 9 * 3600;
  auto [sn, bn] = get("/api/v1/test/next?user=bo", t);
  EXPECT_EQ(bn["phase"], "posttest");
  for (const auto& c : bn["cards"]) submit(c, true, 5000, ++t);
  auto [sr, br] = get("/api/v1/test/report?user=bo", t);
  ASSERT_EQ(sr, 200);
  EXPECT_EQ(br["ttp"], 4.0);
  EXPECT_EQ(br["posttest_accuracy"], 1.0);
  EXPECT_EQ(br["pretest_accuracy"], 0.0);
  EXPECT_EQ(br["mean_seconds_all"], 5.0);
}

TEST_F(HttpTest, ClockOverrideIgnoredWithoutTestClock) {
  shutdown();
  start(false);
  post("/api/v1/users", {{"user_id", "ana"}});
  auto [s, b] = post("/api/v1/record", {{"user_id", "ana"}, {"card_id", "k001"}, {"response", true}}, 5);
  EXPECT_EQ(s, 200);
  EXPECT_GT(b["timestamp"].get<Timestamp>(), kDay0);
}

}  // namespace
}  // namespace mnemo
