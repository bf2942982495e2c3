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

#include "mnemo/ingestion.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mnemo/error.hpp"
#include "mnemo/keyvalue.hpp"

namespace mnemo {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(ErrorCode code, std::size_t line, const std::string& what) {
  throw Error(code, "line " + std::to_string(line) + ": " + what);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int take_int(std::string_view text, std::size_t& pos, std::size_t width) {
  if (pos + width > text.size()) throw Error(ErrorCode::kTypeMismatch, "truncated datetime '" + std::string(text) + "'");
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + width, v);
  if (ec != std::errc() || ptr != text.data() + pos + width) {
    throw Error(ErrorCode::kTypeMismatch, "malformed datetime '" + std::string(text) + "'");
  }
  pos += width;
  return v;
}

void expect(std::string_view text, std::size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw Error(ErrorCode::kTypeMismatch, "malformed datetime '" + std::string(text) + "'");
  }
  ++pos;
}

// Column kinds shared by the JSON and CSV readers.
enum class Column { kUser, kCard, kCardText, kDeckId, kDeckName, kResponse, kDatetime, kDate, kElapsed,
                    kMinutes, kFirstTry, kAnswer, kFeature, kUnknown };

struct ColumnInfo {
  Column kind = Column::kUnknown;
  std::size_t feature = 0;
};

ColumnInfo classify(std::string_view name) {
  static const std::unordered_map<std::string_view, Column> fixed = {
      {"user_id", Column::kUser},         {"card_id", Column::kCard},
      {"card_text", Column::kCardText},   {"deck_id", Column::kDeckId},
      {"deck_name", Column::kDeckName},   {"response", Column::kResponse},
      {"utc_datetime", Column::kDatetime}, {"utc_date", Column::kDate},
      {"elapsed_milliseconds", Column::kElapsed}, {"n_minutes_spent", Column::kMinutes},
      {"correct_on_first_try", Column::kFirstTry}, {"answer_text", Column::kAnswer}};
  if (auto it = fixed.find(name); it != fixed.end()) return {it->second, 0};
  if (auto f = feature_from_name(name); f && index_of(*f) < kDatasetFeatureCount) {
    return {Column::kFeature, index_of(*f)};
  }
  return {};
}

bool parse_response_text(std::string_view v, std::size_t line) {
  if (v == "1" || v == "true" || v == "True" || v == "1.0") return true;
  if (v == "0" || v == "false" || v == "False" || v == "0.0") return false;
  fail(ErrorCode::kInvalidResponse, line, "response must be 0/1 or a boolean, got '" + std::string(v) + "'");
}

double finite_or_fail(double v, std::size_t line, std::string_view column) {
  if (!std::isfinite(v)) fail(ErrorCode::kTypeMismatch, line, "column " + std::string(column) + " is not finite");
  return v;
}

// Applies one textual cell; used by the CSV reader.
void apply_text(DatasetRow& row, const ColumnInfo& col, std::string_view name, const std::string& v) {
  if (v.empty()) return;
  auto number = [&] {
    try {
      return finite_or_fail(parse_double(v, name), row.line, name);
    } catch (const Error& e) {
      fail(ErrorCode::kTypeMismatch, row.line, e.what());
    }
  };
  switch (col.kind) {
    case Column::kUser: row.user_id = v; break;
    case Column::kCard: row.card_id = v; break;
    case Column::kCardText: row.card_text = v; break;
    case Column::kDeckId: row.deck_id = v; break;
    case Column::kDeckName: row.deck_name = v; break;
    case Column::kResponse: row.response = parse_response_text(v, row.line); break;
    case Column::kDatetime: row.utc_datetime = v; break;
    case Column::kDate: row.utc_date = v; break;
    case Column::kElapsed: row.elapsed_milliseconds = static_cast<std::int64_t>(std::llround(number())); break;
    case Column::kMinutes: row.n_minutes_spent = number(); break;
    case Column::kFirstTry: row.correct_on_first_try = number() != 0.0; break;
    case Column::kAnswer: row.answer_text = v; break;
    case Column::kFeature: row.features[col.feature] = number(); break;
    case Column::kUnknown: break;
  }
}

std::string id_text(const json& v, std::size_t line, std::string_view column) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  fail(ErrorCode::kTypeMismatch, line, "column " + std::string(column) + " must be a string or integer");
}

double json_number(const json& v, std::size_t line, std::string_view column) {
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (!v.is_number()) fail(ErrorCode::kTypeMismatch, line, "column " + std::string(column) + " must be numeric");
  return finite_or_fail(v.get<double>(), line, column);
}

void finish_row(DatasetRow& row, bool has_user, bool has_card, bool has_response, bool has_time) {
  if (!has_user || row.user_id.empty()) fail(ErrorCode::kMissingColumn, row.line, "missing user_id");
  if (!has_card || row.card_id.empty()) fail(ErrorCode::kMissingColumn, row.line, "missing card_id");
  if (!has_response) fail(ErrorCode::kMissingColumn, row.line, "missing response");
  if (!has_time || row.utc_datetime.empty()) fail(ErrorCode::kMissingColumn, row.line, "missing utc_datetime");
  try {
    row.timestamp = parse_utc_datetime(row.utc_datetime);
  } catch (const Error& e) {
    fail(ErrorCode::kTypeMismatch, row.line, e.what());
  }
  if (row.elapsed_milliseconds && *row.elapsed_milliseconds < 0) {
    fail(ErrorCode::kTypeMismatch, row.line, "elapsed_milliseconds is negative");
  }
}

// Splits CSV text into records of fields. Quoted fields may contain commas,
// doubled quotes and newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in_.get(c)) {
      any = true;
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get(c);
            field += '"';
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        break;
      } else if (c != '\r') {
        field += c;
      }
    }
    if (quoted) throw Error(ErrorCode::kMalformedRow, "unterminated quoted CSV field");
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::istream& in_;
};

void put_optional(ordered_json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

}  // namespace

bool operator==(const DatasetRow& a, const DatasetRow& b) {
  auto tie = [](const DatasetRow& r) {
    return std::tie(r.user_id, r.card_id, r.card_text, r.deck_id, r.deck_name, r.response, r.timestamp,
                    r.utc_datetime, r.utc_date, r.elapsed_milliseconds, r.n_minutes_spent, r.correct_on_first_try,
                    r.features, r.answer_text);
  };
  return tie(a) == tie(b);
}

Timestamp parse_utc_datetime(std::string_view text) {
  if (all_digits(text) || (text.size() > 1 && text[0] == '-' && all_digits(text.substr(1)))) {
    Timestamp v = 0;
    std::from_chars(text.data(), text.data() + text.size(), v);
    return v;
  }
  using namespace std::chrono;
  std::size_t pos = 0;
  const int y = take_int(text, pos, 4);
  expect(text, pos, '-');
  const int mo = take_int(text, pos, 2);
  expect(text, pos, '-');
  const int d = take_int(text, pos, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorCode::kTypeMismatch, "invalid date '" + std::string(text) + "'");
  Timestamp t = sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
  if (pos == text.size()) return t;
  if (text[pos] != 'T' && text[pos] != ' ') {
    throw Error(ErrorCode::kTypeMismatch, "malformed datetime '" + std::string(text) + "'");
  }
  ++pos;
  const int h = take_int(text, pos, 2);
  expect(text, pos, ':');
  const int mi = take_int(text, pos, 2);
  expect(text, pos, ':');
  const int s = take_int(text, pos, 2);
  if (h > 23 || mi > 59 || s > 60) throw Error(ErrorCode::kTypeMismatch, "invalid time '" + std::string(text) + "'");
  t += h * kSecondsPerHour + mi * 60 + s;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == start) throw Error(ErrorCode::kTypeMismatch, "malformed fraction in '" + std::string(text) + "'");
  }
  if (pos == text.size()) return t;
  if (text[pos] == 'Z' && pos + 1 == text.size()) return t;
  if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    ++pos;
    const int oh = take_int(text, pos, 2);
    if (pos < text.size() && text[pos] == ':') ++pos;
    const int om = take_int(text, pos, 2);
    if (pos == text.size()) return t - sign * (oh * kSecondsPerHour + om * 60);
  }
  throw Error(ErrorCode::kTypeMismatch, "malformed datetime '" + std::string(text) + "'");
}

std::string format_utc_datetime(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{tp - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

DatasetRow row_from_json(std::string_view text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedRow, line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kMalformedRow, line, "row is not a JSON object");
  DatasetRow row;
  row.line = line;
  bool has_user = false, has_card = false, has_response = false, has_time = false;
  for (const auto& [key, v] : j.items()) {
    const ColumnInfo col = classify(key);
    if (v.is_null()) continue;
    auto text = [&]() -> std::string {
      if (!v.is_string()) fail(ErrorCode::kTypeMismatch, line, "column " + key + " must be a string");
      return v.get<std::string>();
    };
    switch (col.kind) {
      case Column::kUser: row.user_id = id_text(v, line, key); has_user = true; break;
      case Column::kCard: row.card_id = id_text(v, line, key); has_card = true; break;
      case Column::kCardText: row.card_text = text(); break;
      case Column::kDeckId: row.deck_id = id_text(v, line, key); break;
      case Column::kDeckName: row.deck_name = text(); break;
      case Column::kResponse:
        if (v.is_boolean()) {
          row.response = v.get<bool>();
        } else if (v.is_number()) {
          const double r = v.get<double>();
          if (r != 0.0 && r != 1.0) fail(ErrorCode::kInvalidResponse, line, "response must be 0 or 1");
          row.response = r == 1.0;
        } else if (v.is_string()) {
          row.response = parse_response_text(v.get<std::string>(), line);
        } else {
          fail(ErrorCode::kInvalidResponse, line, "response must be 0/1 or a boolean");
        }
        has_response = true;
        break;
      case Column::kDatetime:
        row.utc_datetime = v.is_number_integer() ? v.dump() : text();
        has_time = true;
        break;
      case Column::kDate: row.utc_date = text(); break;
      case Column::kElapsed:
        row.elapsed_milliseconds = static_cast<std::int64_t>(std::llround(json_number(v, line, key)));
        break;
      case Column::kMinutes: row.n_minutes_spent = json_number(v, line, key); break;
      case Column::kFirstTry: row.correct_on_first_try = json_number(v, line, key) != 0.0; break;
      case Column::kAnswer: row.answer_text = text(); break;
      case Column::kFeature: row.features[col.feature] = json_number(v, line, key); break;
      case Column::kUnknown: break;
    }
  }
  finish_row(row, has_user, has_card, has_response, has_time);
  return row;
}

std::vector<DatasetRow> parse_jsonl(std::istream& in) {
  std::vector<DatasetRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(row_from_json(line, n));
  }
  return rows;
}

std::vector<DatasetRow> parse_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) return {};
  std::vector<ColumnInfo> columns;
  for (const auto& name : header) columns.push_back(classify(name));
  auto has = [&](Column kind) {
    return std::any_of(columns.begin(), columns.end(), [&](const ColumnInfo& c) { return c.kind == kind; });
  };
  std::vector<DatasetRow> rows;
  std::vector<std::string> fields;
  std::size_t record = 1;
  while (reader.next(fields)) {
    ++record;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size()) {
      fail(ErrorCode::kMalformedRow, record,
           std::to_string(fields.size()) + " fields for " + std::to_string(header.size()) + " columns");
    }
    DatasetRow row;
    row.line = record;
    bool response_seen = false;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      apply_text(row, columns[i], header[i], fields[i]);
      if (columns[i].kind == Column::kResponse && !fields[i].empty()) response_seen = true;
    }
    finish_row(row, has(Column::kUser), has(Column::kCard), response_seen, has(Column::kDatetime));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DatasetRow> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset " + path.string());
  return path.extension() == ".csv" ? parse_csv(in) : parse_jsonl(in);
}

std::string row_to_json(const DatasetRow& row) {
  ordered_json j;
  j["user_id"] = row.user_id;
  j["card_id"] = row.card_id;
  if (!row.card_text.empty()) j["card_text"] = row.card_text;
  if (!row.deck_id.empty()) j["deck_id"] = row.deck_id;
  if (!row.deck_name.empty()) j["deck_name"] = row.deck_name;
  for (Feature f : all_features()) {
    if (index_of(f) >= kDatasetFeatureCount) break;
    if (const auto& v = row.features[index_of(f)]) j[std::string(feature_name(f))] = *v;
  }
  if (row.elapsed_milliseconds) j["elapsed_milliseconds"] = *row.elapsed_milliseconds;
  put_optional(j, "n_minutes_spent", row.n_minutes_spent);
  if (row.correct_on_first_try) j["correct_on_first_try"] = *row.correct_on_first_try ? 1 : 0;
  j["response"] = row.response ? 1 : 0;
  j["utc_datetime"] = row.utc_datetime;
  if (!row.utc_date.empty()) j["utc_date"] = row.utc_date;
  if (!row.answer_text.empty()) j["answer_text"] = row.answer_text;
  return j.dump();
}

void write_jsonl(std::span<const DatasetRow> rows, std::ostream& out) {
  for (const DatasetRow& row : rows) out << row_to_json(row) << '\n';
}

StudyRecord to_record(const DatasetRow& row) {
  return {row.user_id, row.card_id, row.timestamp, row.response, row.elapsed_milliseconds.value_or(0), row.deck_id};
}

std::vector<std::size_t> chronological_order(std::span<const DatasetRow> rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].timestamp < rows[b].timestamp; });
  return order;
}

std::vector<StudyRecord> chronological_records(std::span<const DatasetRow> rows) {
  std::vector<StudyRecord> out;
  out.reserve(rows.size());
  for (std::size_t i : chronological_order(rows)) out.push_back(to_record(rows[i]));
  return out;
}

Histories build_histories(std::span<const DatasetRow> rows) {
  Histories h;
  for (std::size_t i : chronological_order(rows)) {
    const DatasetRow& row = rows[i];
    auto it = h.users.find(row.user_id);
    if (it == h.users.end()) it = h.users.emplace(row.user_id, StudyHistory{}).first;
    it->second = append_record(std::move(it->second),
                               Flashcard{row.card_id, row.card_text, {}, row.deck_id, row.deck_name}, to_record(row));
    h.cards.add(row.card_id, row.response);
    ++h.record_count;
  }
  return h;
}

std::vector<Flashcard> corpus_from_rows(std::span<const DatasetRow> rows) {
  std::vector<Flashcard> out;
  std::unordered_set<std::string_view> present;
  for (const DatasetRow& row : rows) {
    if (!present.insert(row.card_id).second) continue;
    out.push_back({row.card_id, row.card_text.empty() ? row.card_id : row.card_text, {}, row.deck_id, row.deck_name});
  }
  return out;
}

std::vector<Flashcard> read_cards_jsonl(std::istream& in) {
  std::vector<Flashcard> cards;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformedRow, n, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("card_id")) fail(ErrorCode::kMissingColumn, n, "missing card_id");
    Flashcard card;
    card.card_id = id_text(j["card_id"], n, "card_id");
    auto str = [&](const char* key) { return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : ""; };
    card.front_text = str("front_text");
    if (card.front_text.empty()) card.front_text = str("card_text");
    card.back_text = str("back_text");
    card.deck_id = j.contains("deck_id") && !j["deck_id"].is_null() ? id_text(j["deck_id"], n, "deck_id") : "";
    card.deck_name = str("deck_name");
    try {
      validate(card);
    } catch (const Error& e) {
      fail(ErrorCode::kMalformedRow, n, e.what());
    }
    cards.push_back(std::move(card));
  }
  return cards;
}

void write_cards_jsonl(std::span<const Flashcard> cards, std::ostream& out) {
  for (const Flashcard& c : cards) {
    ordered_json j;
    j["card_id"] = c.card_id;
    j["front_text"] = c.front_text;
    j["back_text"] = c.back_text;
    j["deck_id"] = c.deck_id;
    j["deck_name"] = c.deck_name;
    out << j.dump() << '\n';
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string dataset_fingerprint(std::span<const DatasetRow> rows) {
  std::ostringstream canonical;
  write_jsonl(rows, canonical);
  return sha256_hex(canonical.str());
}

SplitManifest chronological_split(std::span<const DatasetRow> rows, double ratio) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot split an empty dataset");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "split ratio must be in [0, 1]");
  const std::vector<std::size_t> order = chronological_order(rows);
  const double raw = ratio * static_cast<double>(rows.size());
  const double nearest = std::round(raw);
  const auto n_train = std::min(
      rows.size(), static_cast<std::size_t>(std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw)));
  SplitManifest m;
  m.ratio = ratio;
  m.fingerprint = dataset_fingerprint(rows);
  m.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return m;
}

void write_manifest(const SplitManifest& manifest, std::ostream& out) {
  out << "ratio=" << format_double(manifest.ratio) << '\n';
  out << "fingerprint=" << manifest.fingerprint << '\n';
  out << "[train]\n";
  for (std::size_t id : manifest.train) out << id << '\n';
  out << "[eval]\n";
  for (std::size_t id : manifest.eval) out << id << '\n';
}

SplitManifest read_manifest(std::istream& in) {
  SplitManifest m;
  std::vector<std::size_t>* section = nullptr;
  std::string line;
  std::size_t n = 0;
  bool has_ratio = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "[train]") {
      section = &m.train;
    } else if (line == "[eval]") {
      section = &m.eval;
    } else if (line.rfind("ratio=", 0) == 0) {
      m.ratio = parse_double(std::string_view(line).substr(6), "ratio");
      has_ratio = true;
    } else if (line.rfind("fingerprint=", 0) == 0) {
      m.fingerprint = line.substr(12);
    } else if (section) {
      std::size_t id = 0;
      const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
      if (ec != std::errc() || ptr != line.data() + line.size()) {
        fail(ErrorCode::kMalformedRow, n, "bad record id '" + line + "'");
      }
      section->push_back(id);
    } else {
      fail(ErrorCode::kMalformedRow, n, "unexpected line '" + line + "'");
    }
  }
  if (!has_ratio) throw Error(ErrorCode::kMalformedRow, "manifest lacks ratio");
  std::unordered_set<std::size_t> ids(m.train.begin(), m.train.end());
  if (ids.size() != m.train.size()) throw Error(ErrorCode::kInvalidArgument, "duplicate record id in train split");
  for (std::size_t id : m.eval) {
    if (!ids.insert(id).second) throw Error(ErrorCode::kInvalidArgument, "record id " + std::to_string(id) + " repeated");
  }
  return m;
}

namespace {

template <typename Visit>
void replay_features(std::span<const DatasetRow> rows, Visit&& visit) {
  std::unordered_map<std::string, UserState, StringHash, std::equal_to<>> users;
  CardAggregates aggregates;
  for (std::size_t i : chronological_order(rows)) {
    const DatasetRow& row = rows[i];
    auto it = users.find(row.user_id);
    if (it == users.end()) it = users.emplace(row.user_id, UserState(row.user_id)).first;
    visit(i, extract(it->second, row.card_id, row.timestamp, aggregates));
    it->second.apply(to_record(row));
    aggregates.add(row.card_id, row.response);
  }
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

FeatureAgreement compare_stored_features(std::span<const DatasetRow> rows, double tolerance) {
  FeatureAgreement out;
  replay_features(rows, [&](std::size_t i, const FeatureVector& v) {
    const DatasetRow& row = rows[i];
    bool any = false;
    bool all = true;
    for (std::size_t f = 0; f < kDatasetFeatureCount; ++f) {
      if (!row.features[f]) continue;
      any = true;
      const double stored = *row.features[f];
      const double mine = v.values[f];
      bool ok = close(stored, mine, tolerance);
      if (!ok && f == index_of(Feature::kUserCardDeltaPrevious)) {
        ok = close(stored, mine * kSecondsPerHour, tolerance);
      }
      if (!ok && f == index_of(Feature::kSm2EFactor) && v[Feature::kIsNewFact] == 1.0) {
        ok = stored == 0.0 || stored == kSm2InitialEFactor;
      }
      ++out.compared[f];
      if (!ok) {
        ++out.mismatched[f];
        all = false;
      }
    }
    if (any) {
      ++out.rows;
      if (all) ++out.matching_rows;
    }
  });
  return out;
}

void fill_stored_features(std::span<DatasetRow> rows) {
  std::vector<FeatureVector> computed(rows.size());
  replay_features(rows, [&](std::size_t i, const FeatureVector& v) { computed[i] = v; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < kDatasetFeatureCount; ++f) rows[i].features[f] = computed[i].values[f];
  }
}

}  // namespace mnemo
