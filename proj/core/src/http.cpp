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

#include <atomic>
#include <charconv>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mnemo/error.hpp"
#include "mnemo/service.hpp"

namespace mnemo {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kApiVersion = "v1";
constexpr const char* kJson = "application/json";

ordered_json envelope() {
  ordered_json j;
  j["version"] = kApiVersion;
  return j;
}

void send(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  ordered_json j = envelope();
  j["error"] = {{"code", std::string(to_string(code))}, {"message", message}};
  send(res, http_status(code), j);
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(); }

std::string require_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name) || req.get_param_value(name).empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing query parameter '") + name + "'");
  }
  return req.get_param_value(name);
}

json parse_body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::kInvalidArgument, "request body is not valid JSON");
  }
  if (!body.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  return body;
}

std::string require_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("field '") + key + "' must be a non-empty string");
  }
  return body[key].get<std::string>();
}

bool parse_response(const json& body) {
  if (!body.contains("response")) throw Error(ErrorCode::kInvalidArgument, "field 'response' is required");
  const json& r = body["response"];
  if (r.is_boolean()) return r.get<bool>();
  if (r.is_number_integer() && (r.get<long long>() == 0 || r.get<long long>() == 1)) return r.get<long long>() == 1;
  throw Error(ErrorCode::kInvalidResponse, "field 'response' must be a boolean or 0/1");
}

StudyRequest study_request(const json& body) {
  StudyRequest r;
  r.user_id = require_string(body, "user_id");
  r.card_id = require_string(body, "card_id");
  r.response = parse_response(body);
  if (body.contains("elapsed_ms")) {
    if (!body["elapsed_ms"].is_number_integer()) throw Error(ErrorCode::kTypeMismatch, "elapsed_ms must be an integer");
    r.elapsed_ms = body["elapsed_ms"].get<std::int64_t>();
  }
  if (body.contains("timestamp")) {
    if (!body["timestamp"].is_number_integer()) throw Error(ErrorCode::kTypeMismatch, "timestamp must be UTC seconds");
    r.timestamp = body["timestamp"].get<Timestamp>();
  }
  if (body.contains("idempotency_key")) r.idempotency_key = require_string(body, "idempotency_key");
  if (body.contains("answer_text") && body["answer_text"].is_string()) r.answer_text = body["answer_text"].get<std::string>();
  return r;
}

ordered_json ack_json(const RecordAck& ack) {
  ordered_json j = envelope();
  j["applied"] = ack.applied;
  j["record_count"] = ack.record_count;
  j["timestamp"] = ack.timestamp;
  return j;
}

ordered_json test_json(const TestSession& t) {
  ordered_json j = envelope();
  j["user_id"] = t.user_id;
  j["index"] = t.index;
  j["scheduler"] = t.scheduler;
  j["phase"] = t.phase_name();
  j["cards"] = t.cards;
  return j;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownUser:
    case ErrorCode::kUnknownCard:
    case ErrorCode::kMissingEmbedding:
      return 404;
    case ErrorCode::kOutOfOrderTimestamp:
    case ErrorCode::kPhaseViolation:
    case ErrorCode::kUserMismatch:
      return 409;
    case ErrorCode::kEmptyCandidates:
    case ErrorCode::kEmptySplit:
    case ErrorCode::kDegenerateLabels:
      return 422;
    case ErrorCode::kIoError:
    case ErrorCode::kNonfiniteActivation:
    case ErrorCode::kCorruptCheckpoint:
      return 500;
    default:
      return 400;
  }
}

struct HttpServer::Impl {
  Impl(Engine& e, ServiceConfig c) : engine(e), config(std::move(c)) {}

  Engine& engine;
  ServiceConfig config;
  httplib::Server server;
  int bound_port = -1;
  std::atomic<bool> stopping{false};
  std::atomic<bool> in_run{false};

  Timestamp clock(const httplib::Request& req) const {
    if (config.test_clock && req.has_header("X-Clock-Override")) {
      const std::string v = req.get_header_value("X-Clock-Override");
      Timestamp t = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), t);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw Error(ErrorCode::kInvalidArgument, "X-Clock-Override must be integral UTC seconds");
      }
      return t;
    }
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  template <typename Fn>
  httplib::Server::Handler wrap(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res, clock(req));
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, ErrorCode::kInvalidArgument, e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::kIoError, e.what());
      }
    };
  }

  void routes() {
    server.Post("/api/v1/users", wrap([this](const auto& req, auto& res, Timestamp now) {
      const json body = parse_body(req);
      const std::string user = require_string(body, "user_id");
      const bool created = engine.create_user(user, now);
      ordered_json j = envelope();
      j["user_id"] = user;
      j["created"] = created;
      send(res, created ? 201 : 200, j);
    }));

    server.Get("/api/v1/schedule", wrap([this](const auto& req, auto& res, Timestamp now) {
      const std::string user = require_param(req, "user");
      const std::string deck = req.has_param("deck") ? req.get_param_value("deck") : "";
      std::size_t n = 10;
      if (req.has_param("n")) {
        const std::string v = req.get_param_value("n");
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc() || ptr != v.data() + v.size() || n == 0) {
          throw Error(ErrorCode::kInvalidArgument, "n must be a positive integer");
        }
      }
      const PolicyKind policy = parse_policy_kind(req.has_param("policy") ? req.get_param_value("policy") : "delta");
      const ScheduleResult result = engine.schedule(user, deck, n, policy, now);
      ordered_json j = envelope();
      j["user_id"] = result.user_id;
      j["policy"] = std::string(to_string(result.policy));
      j["model"] = engine.model().tag();
      j["cards"] = ordered_json::array();
      for (const ScheduledCard& c : result.cards) {
        ordered_json item;
        item["card_id"] = c.card_id;
        item["p_now"] = c.p_now;
        if (c.delta) {
          item["delta"] = {{"score", c.delta->score},
                           {"p_now", c.delta->p_now},
                           {"p_correct", c.delta->p_correct},
                           {"p_incorrect", c.delta->p_incorrect},
                           {"p_no_study", c.delta->p_no_study}};
        }
        j["cards"].push_back(std::move(item));
      }
      send(res, 200, j);
    }));

    server.Post("/api/v1/record", wrap([this](const auto& req, auto& res, Timestamp now) {
      const RecordAck ack = engine.record_study(study_request(parse_body(req)), now);
      send(res, 200, ack_json(ack));
    }));

    server.Get("/api/v1/predict", wrap([this](const auto& req, auto& res, Timestamp now) {
      const std::string user = require_param(req, "user");
      const std::string card = require_param(req, "card");
      const double p = engine.predict(user, card, now);
      ordered_json j = envelope();
      j["user_id"] = user;
      j["card_id"] = card;
      j["model"] = engine.model().tag();
      j["probability"] = p;
      j["seen"] = engine.user_state(user).card(card) != nullptr;
      j["at"] = now;
      send(res, 200, j);
    }));

    server.Get("/api/v1/curve", wrap([this](const auto& req, auto& res, Timestamp now) {
      const std::string user = require_param(req, "user");
      const std::string card = require_param(req, "card");
      const ForgettingCurve curve = engine.curve(user, card, now);
      ordered_json j = envelope();
      j["user_id"] = user;
      j["card_id"] = curve.card_id;
      j["model"] = engine.model().tag();
      j["start"] = now;
      j["points"] = ordered_json::array();
      for (const CurvePoint& p : curve.points) j["points"].push_back({{"day", p.day}, {"probability", p.probability}});
      send(res, 200, j);
    }));

    server.Get("/api/v1/stats", wrap([this](const auto& req, auto& res, Timestamp now) {
      const UserStats s = engine.stats(require_param(req, "user"), now);
      ordered_json j = envelope();
      j["user_id"] = s.user_id;
      j["records"] = s.records;
      j["correct"] = s.totals.positive;
      j["incorrect"] = s.totals.negative;
      j["accuracy"] = s.totals.accuracy();
      j["cards_seen"] = s.cards_seen;
      j["session_records"] = s.session.total();
      j["session_accuracy"] = s.session.accuracy();
      j["test_phase"] = s.test_phase ? ordered_json(*s.test_phase) : ordered_json();
      send(res, 200, j);
    }));

    server.Post("/api/v1/test/start", wrap([this](const auto& req, auto& res, Timestamp now) {
      const json body = parse_body(req);
      const std::string user = require_string(body, "user_id");
      const std::string deck = body.contains("deck") && body["deck"].is_string() ? body["deck"].get<std::string>() : "";
      std::vector<std::string> cards;
      if (body.contains("cards")) cards = body["cards"].get<std::vector<std::string>>();
      send(res, 201, test_json(engine.test_start(user, deck, cards, now)));
    }));

    server.Get("/api/v1/test/next", wrap([this](const auto& req, auto& res, Timestamp now) {
      const TestNext next = engine.test_next(require_param(req, "user"), now);
      ordered_json j = envelope();
      j["phase"] = next.phase;
      j["day"] = next.day;
      j["cards"] = next.cards;
      j["available_at"] = next.available_at ? ordered_json(*next.available_at) : ordered_json();
      send(res, 200, j);
    }));

    server.Post("/api/v1/test/submit", wrap([this](const auto& req, auto& res, Timestamp now) {
      const StudyRequest request = study_request(parse_body(req));
      const RecordAck ack = engine.test_submit(request, now);
      ordered_json j = ack_json(ack);
      j["phase"] = engine.test_session(request.user_id)->phase_name();
      send(res, 200, j);
    }));

    server.Get("/api/v1/test/report", wrap([this](const auto& req, auto& res, Timestamp) {
      const std::string user = require_param(req, "user");
      const ThroughputReport r = engine.test_report(user);
      ordered_json j = envelope();
      j["user_id"] = user;
      j["scheduler"] = r.scheduler;
      j["pretest_accuracy"] = r.pretest_accuracy;
      j["posttest_accuracy"] = r.posttest_accuracy;
      j["mean_seconds_correct"] = optional_json(r.mean_seconds_correct);
      j["mean_seconds_all"] = optional_json(r.mean_seconds_all);
      j["ttp"] = optional_json(r.ttp);
      send(res, 200, j);
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      ordered_json j = envelope();
      j["error"] = {{"code", res.status == 404 ? "not_found" : "http_error"}, {"message", "no such endpoint"}};
      res.set_content(j.dump(), kJson);
    });
  }
};

HttpServer::HttpServer(Engine& engine, ServiceConfig config) : impl_(std::make_unique<Impl>(engine, std::move(config))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  Impl& i = *impl_;
  if (i.config.port == 0) {
    i.bound_port = i.server.bind_to_any_port(i.config.host);
  } else {
    i.bound_port = i.server.bind_to_port(i.config.host, i.config.port) ? i.config.port : -1;
  }
  if (i.bound_port < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + i.config.host + ":" + std::to_string(i.config.port));
  }
  return i.bound_port;
}

void HttpServer::run() {
  Impl& i = *impl_;
  i.in_run = true;
  if (!i.stopping) i.server.listen_after_bind();
  i.in_run = false;
}

// httplib ignores stop() until listening has begun, so retry while run() is live.
void HttpServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  while (impl_->in_run) {
    impl_->server.stop();
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

int HttpServer::port() const { return impl_->bound_port; }

}  // namespace mnemo
