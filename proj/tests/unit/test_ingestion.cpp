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

#include <random>
#include <sstream>

#include "mnemo/ingestion.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mnemo {
namespace {

constexpr const char* kJsonl =
    R"({"user_id":"u1","card_id":7,"card_text":"What is H2O?","deck_id":"chem","response":1,"utc_datetime":"2020-05-01T10:00:00Z","elapsed_milliseconds":3200,"acc_user":0.5}
)"
    "\n"
    R"({"user_id":"u1","card_id":"8","response":false,"utc_datetime":"2020-05-01 09:59:00","answer_text":"water, I think"}
)";

TEST(Ingestion, ParseJsonl) {
  std::istringstream in(kJsonl);
  const auto rows = parse_jsonl(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].card_id, "7");
  EXPECT_EQ(rows[0].line, 1u);
  EXPECT_EQ(rows[1].line, 3u);
  EXPECT_TRUE(rows[0].response);
  EXPECT_FALSE(rows[1].response);
  EXPECT_EQ(rows[0].elapsed_milliseconds, 3200);
  EXPECT_EQ(rows[0].features[index_of(Feature::kAccUser)], 0.5);
  EXPECT_FALSE(rows[0].features[index_of(Feature::kAccCard)]);
  EXPECT_EQ(rows[1].timestamp, rows[0].timestamp - 60);
  EXPECT_EQ(rows[1].answer_text, "water, I think");
}

TEST(Ingestion, JsonlErrorsCarryLine) {
  auto code = [](const std::string& text) {
    std::istringstream in(text);
    return testing::error_code([&] { parse_jsonl(in); });
  };
  EXPECT_EQ(code(R"({"card_id":"a","response":1,"utc_datetime":"2020-01-01"})"), ErrorCode::kMissingColumn);
  EXPECT_EQ(code(R"({"user_id":"u","card_id":"a","response":2,"utc_datetime":"2020-01-01"})"),
            ErrorCode::kInvalidResponse);
  EXPECT_EQ(code(R"({"user_id":"u","card_id":"a","response":1,"utc_datetime":"yesterday"})"),
            ErrorCode::kTypeMismatch);
  EXPECT_EQ(code("{not json"), ErrorCode::kMalformedRow);
  std::istringstream in("\n\n{\"user_id\":\"u\"}\n");
  try {
    parse_jsonl(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Ingestion, ParseCsvWithQuotedMultilineField) {
  std::istringstream in(
      "user_id,card_id,card_text,response,utc_datetime,leitner_box\r\n"
      "u1,c1,\"Line one\nline \"\"two\"\"\",True,2020-01-01T00:00:00+00:00,3\r\n"
      "u2,c2,plain,0,1577836900,\r\n");
  const auto rows = parse_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].card_text, "Line one\nline \"two\"");
  EXPECT_TRUE(rows[0].response);
  EXPECT_EQ(rows[0].timestamp, 1577836800);
  EXPECT_EQ(rows[1].timestamp, 1577836900);
  EXPECT_EQ(rows[0].features[index_of(Feature::kLeitnerBox)], 3.0);
  EXPECT_FALSE(rows[1].features[index_of(Feature::kLeitnerBox)]);
  std::istringstream missing("card_id,response,utc_datetime\nc,1,2020-01-01\n");
  EXPECT_MNEMO_ERROR(parse_csv(missing), ErrorCode::kMissingColumn);
}

TEST(Ingestion, DatetimeFormats) {
  EXPECT_EQ(parse_utc_datetime("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_utc_datetime("2020-01-01"), 1577836800);
  EXPECT_EQ(parse_utc_datetime("2020-01-01T01:00:00+01:00"), 1577836800);
  EXPECT_EQ(parse_utc_datetime("2020-01-01 00:00:00.750"), 1577836800);
  EXPECT_EQ(parse_utc_datetime("2024-02-29T12:00:00Z"), 1709208000);
  EXPECT_EQ(format_utc_datetime(1709208000), "2024-02-29T12:00:00Z");
  EXPECT_MNEMO_ERROR(parse_utc_datetime("2020-13-01"), ErrorCode::kTypeMismatch);
  EXPECT_MNEMO_ERROR(parse_utc_datetime(""), ErrorCode::kTypeMismatch);
}

DatasetRow make_row(int i, std::mt19937_64& rng) {
  DatasetRow r;
  r.user_id = "user-" + std::to_string(i % 3);
  r.card_id = "card-" + std::to_string(rng() % 7);
  r.card_text = i % 2 ? "front \"quoted\", with comma" : "";
  r.deck_id = "d" + std::to_string(i % 2);
  r.response = rng() % 2;
  r.timestamp = 1600000000 + static_cast<Timestamp>(rng() % 100000);
  r.utc_datetime = format_utc_datetime(r.timestamp);
  if (i % 3 == 0) r.elapsed_milliseconds = static_cast<std::int64_t>(rng() % 9000);
  if (i % 4 == 0) r.n_minutes_spent = 0.1 * static_cast<double>(i);
  r.features[index_of(Feature::kAccUser)] = 1.0 / (1 + i);
  r.answer_text = i % 5 ? "" : "answer\nwith newline";
  return r;
}

TEST(Ingestion, JsonlRoundTrip) {
  std::mt19937_64 rng(1);
  std::vector<DatasetRow> rows;
  for (int i = 0; i < 40; ++i) rows.push_back(make_row(i, rng));
  std::stringstream buf;
  write_jsonl(rows, buf);
  const auto back = parse_jsonl(buf);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_TRUE(back[i] == rows[i]) << i;
  EXPECT_TRUE(row_from_json(row_to_json(rows[3]), 1) == rows[3]);
}

TEST(Ingestion, ChronologicalOrderIsStable) {
  std::vector<DatasetRow> rows(4);
  const Timestamp ts[] = {30, 10, 30, 10};
  for (std::size_t i = 0; i < 4; ++i) {
    rows[i].user_id = "u";
    rows[i].card_id = "c" + std::to_string(i);
    rows[i].timestamp = ts[i];
  }
  EXPECT_EQ(chronological_order(rows), (std::vector<std::size_t>{1, 3, 0, 2}));
  const Histories h = build_histories(rows);
  EXPECT_EQ(h.record_count, 4u);
  EXPECT_EQ(h.users.at("u").entries()[0].record.card_id, "c1");
  EXPECT_EQ(h.cards.size(), 4u);
}

TEST(Ingestion, SplitAndManifest) {
  std::mt19937_64 rng(2);
  std::vector<DatasetRow> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(make_row(i, rng));
  const SplitManifest m = chronological_split(rows, 0.75);
  EXPECT_EQ(m.train.size(), 3u);
  EXPECT_EQ(m.eval.size(), 1u);
  EXPECT_FALSE(m.degenerate());
  for (std::size_t t : m.train) EXPECT_LE(rows[t].timestamp, rows[m.eval[0]].timestamp);
  EXPECT_EQ(m.fingerprint.size(), 64u);
  EXPECT_EQ(chronological_split(rows, 0.75), m);
  std::stringstream buf;
  write_manifest(m, buf);
  EXPECT_EQ(read_manifest(buf), m);
  EXPECT_TRUE(chronological_split(rows, 1.0).degenerate());
  EXPECT_MNEMO_ERROR(chronological_split({}, 0.75), ErrorCode::kEmptyDataset);
  rows[0].response = !rows[0].response;
  EXPECT_NE(dataset_fingerprint(rows), m.fingerprint);
  std::stringstream overlap("ratio=0.5\n[train]\n1\n[eval]\n1\n");
  EXPECT_MNEMO_ERROR(read_manifest(overlap), ErrorCode::kInvalidArgument);
}

TEST(Ingestion, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Ingestion, CardsRoundTrip) {
  std::vector<Flashcard> cards{{"a", "front a", "back a", "d", "Deck"}, {"b", "front \"b\"", "", "", ""}};
  std::stringstream buf;
  write_cards_jsonl(cards, buf);
  EXPECT_EQ(read_cards_jsonl(buf), cards);
  std::mt19937_64 rng(3);
  std::vector<DatasetRow> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(make_row(i, rng));
  const auto corpus = corpus_from_rows(rows);
  for (const Flashcard& c : corpus) EXPECT_FALSE(c.front_text.empty());
}

TEST(Ingestion, StoredFeaturesAgreeAfterFill) {
  std::mt19937_64 rng(4);
  const auto log = oracle::random_log(rng, 500, 4, 15);
  std::vector<DatasetRow> rows;
  for (const auto& r : log) {
    DatasetRow d;
    d.user_id = r.user_id;
    d.card_id = r.card_id;
    d.response = r.correct;
    d.timestamp = r.timestamp;
    d.utc_datetime = format_utc_datetime(r.timestamp);
    rows.push_back(d);
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  fill_stored_features(rows);
  FeatureAgreement a = compare_stored_features(rows);
  EXPECT_EQ(a.rows, rows.size());
  EXPECT_EQ(a.matching_rows, rows.size());
  // Documented unit variants are accepted.
  for (DatasetRow& r : rows) {
    if (auto& v = r.features[index_of(Feature::kUserCardDeltaPrevious)]) *v *= 3600.0;
    if (r.features[index_of(Feature::kIsNewFact)] == 1.0) r.features[index_of(Feature::kSm2EFactor)] = 0.0;
  }
  a = compare_stored_features(rows);
  EXPECT_EQ(a.matching_rows, rows.size());
  rows[0].features[index_of(Feature::kLeitnerBox)] = 99;
  a = compare_stored_features(rows);
  EXPECT_EQ(a.matching_rows, rows.size() - 1);
  EXPECT_EQ(a.mismatched[index_of(Feature::kLeitnerBox)], 1u);
}

}  // namespace
}  // namespace mnemo
